#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "lesionnet/core/tensor.hpp"

namespace lesionnet {

enum class Padding { same, valid };

/// Geometry of a rank-2 or rank-3 cross-correlation.
///
/// Weights are laid out [out_channels, in_channels / groups, kernel...].
/// `groups == in_channels` is a depthwise convolution.
struct ConvSpec {
  int rank = 2;
  std::vector<std::size_t> kernel;
  std::vector<std::size_t> stride;
  Padding padding = Padding::same;
  std::size_t groups = 1;
  std::size_t out_channels = 1;

  /// Cubic/square kernel with the same stride on every spatial axis.
  static ConvSpec uniform(int rank, std::size_t out_channels, std::size_t kernel, std::size_t stride = 1,
                          Padding padding = Padding::same, std::size_t groups = 1) {
    ConvSpec s;
    s.rank = rank;
    s.kernel.assign(static_cast<std::size_t>(rank), kernel);
    s.stride.assign(static_cast<std::size_t>(rank), stride);
    s.padding = padding;
    s.groups = groups;
    s.out_channels = out_channels;
    s.validate();
    return s;
  }

  void validate() const {
    if (rank != 2 && rank != 3) throw ShapeError("conv rank must be 2 or 3, got " + std::to_string(rank));
    if (kernel.size() != static_cast<std::size_t>(rank) || stride.size() != static_cast<std::size_t>(rank)) {
      throw ShapeError("conv kernel/stride length must equal rank " + std::to_string(rank));
    }
    for (std::size_t i = 0; i < kernel.size(); ++i) {
      if (kernel[i] == 0) throw ShapeError("conv kernel extent 0 in spatial dim " + std::to_string(i));
      if (stride[i] == 0) throw ShapeError("conv stride 0 in spatial dim " + std::to_string(i));
    }
    if (groups == 0) throw ShapeError("conv groups must be positive");
    if (out_channels == 0 || out_channels % groups != 0) {
      throw ShapeError("conv out_channels " + std::to_string(out_channels) + " not divisible by groups " +
                       std::to_string(groups));
    }
  }

  Shape weight_shape(std::size_t in_channels) const {
    Shape s{out_channels, in_channels / groups};
    s.insert(s.end(), kernel.begin(), kernel.end());
    return s;
  }
};

/// Output extent of one spatial axis.
inline std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, Padding padding) {
  if (padding == Padding::same) return (in + stride - 1) / stride;
  if (in < kernel) {
    throw ShapeError("VALID conv needs input extent " + std::to_string(in) + " >= kernel " + std::to_string(kernel));
  }
  return (in - kernel) / stride + 1;
}

/// Low-side padding; SAME puts the odd cell on the high side.
inline std::size_t conv_pad_low(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
                                Padding padding) {
  if (padding == Padding::valid) return 0;
  const std::ptrdiff_t total = static_cast<std::ptrdiff_t>((out - 1) * stride + kernel) - static_cast<std::ptrdiff_t>(in);
  return total > 0 ? static_cast<std::size_t>(total / 2) : 0;
}

inline Shape conv_output_shape(const Shape& x, const ConvSpec& spec) {
  spec.validate();
  const auto rank = static_cast<std::size_t>(spec.rank);
  if (x.size() != rank + 2) {
    throw ShapeError("conv" + std::to_string(rank) + "d expects input rank " + std::to_string(rank + 2) + ", got " +
                     shape_str(x));
  }
  if (x[1] % spec.groups != 0) {
    throw ShapeError("input channels (dim 1) = " + std::to_string(x[1]) + " not divisible by groups " +
                     std::to_string(spec.groups));
  }
  Shape out{x[0], spec.out_channels};
  for (std::size_t i = 0; i < rank; ++i) {
    if (x[i + 2] == 0) throw ShapeError("zero-size spatial dim " + std::to_string(i + 2));
    out.push_back(conv_out_extent(x[i + 2], spec.kernel[i], spec.stride[i], spec.padding));
  }
  return out;
}

namespace detail {

/// Rank-2 and rank-3 convolutions share one 3-D kernel; rank 2 is depth 1.
struct ConvGeometry {
  std::size_t n, cin, cout, groups;
  std::array<std::size_t, 3> in, out, k, s, pad;

  std::size_t in_plane() const { return in[0] * in[1] * in[2]; }
  std::size_t out_plane() const { return out[0] * out[1] * out[2]; }
  std::size_t k_volume() const { return k[0] * k[1] * k[2]; }
  std::size_t cin_g() const { return cin / groups; }
  std::size_t cout_g() const { return cout / groups; }
};

/// Output index range [lo, hi) whose input coordinate o*s + k - pad is in bounds.
inline std::array<std::size_t, 2> valid_range(std::size_t out, std::size_t in, std::size_t s, std::size_t k,
                                              std::size_t pad) {
  const auto si = static_cast<std::ptrdiff_t>(s);
  const auto off = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(pad);
  std::ptrdiff_t lo = 0;
  if (off < 0) lo = (-off + si - 1) / si;
  const std::ptrdiff_t last_in = static_cast<std::ptrdiff_t>(in) - 1 - off;
  if (last_in < 0) return {0, 0};
  std::ptrdiff_t hi = last_in / si + 1;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out));
  if (hi < lo) hi = lo;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

inline ConvGeometry conv_geometry(const Shape& x, const Shape& y, const ConvSpec& spec) {
  ConvGeometry g{};
  g.n = x[0];
  g.cin = x[1];
  g.cout = spec.out_channels;
  g.groups = spec.groups;
  const std::size_t off = spec.rank == 2 ? 1 : 0;
  g.in = {1, 1, 1};
  g.out = {1, 1, 1};
  g.k = {1, 1, 1};
  g.s = {1, 1, 1};
  g.pad = {0, 0, 0};
  for (std::size_t i = 0; i < static_cast<std::size_t>(spec.rank); ++i) {
    g.in[i + off] = x[i + 2];
    g.out[i + off] = y[i + 2];
    g.k[i + off] = spec.kernel[i];
    g.s[i + off] = spec.stride[i];
    g.pad[i + off] = conv_pad_low(x[i + 2], y[i + 2], spec.kernel[i], spec.stride[i], spec.padding);
  }
  return g;
}

/// Visits every (output row, input row, weight) triple of the correlation.
/// `row(out_offset, in_offset, weight_index, ow_lo, ow_hi, in_col0)` handles
/// one contiguous output row; input column is ow*s + in_col0.
template <typename RowFn>
void for_each_conv_row(const ConvGeometry& g, RowFn&& row) {
  const std::size_t cin_g = g.cin_g(), cout_g = g.cout_g();
  const std::size_t ip = g.in_plane(), op = g.out_plane(), kv = g.k_volume();
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t oc = 0; oc < g.cout; ++oc) {
      const std::size_t grp = oc / cout_g;
      const std::size_t out_base = (n * g.cout + oc) * op;
      for (std::size_t icg = 0; icg < cin_g; ++icg) {
        const std::size_t ic = grp * cin_g + icg;
        const std::size_t in_base = (n * g.cin + ic) * ip;
        const std::size_t w_base = (oc * cin_g + icg) * kv;
        for (std::size_t kd = 0; kd < g.k[0]; ++kd) {
          const auto rd = valid_range(g.out[0], g.in[0], g.s[0], kd, g.pad[0]);
          for (std::size_t kh = 0; kh < g.k[1]; ++kh) {
            const auto rh = valid_range(g.out[1], g.in[1], g.s[1], kh, g.pad[1]);
            for (std::size_t kw = 0; kw < g.k[2]; ++kw) {
              const auto rw = valid_range(g.out[2], g.in[2], g.s[2], kw, g.pad[2]);
              if (rw[0] >= rw[1]) continue;
              const std::size_t widx = w_base + (kd * g.k[1] + kh) * g.k[2] + kw;
              const std::size_t col0 = rw[0] * g.s[2] + kw - g.pad[2];
              for (std::size_t od = rd[0]; od < rd[1]; ++od) {
                const std::size_t id = od * g.s[0] + kd - g.pad[0];
                for (std::size_t oh = rh[0]; oh < rh[1]; ++oh) {
                  const std::size_t ih = oh * g.s[1] + kh - g.pad[1];
                  row(out_base + (od * g.out[1] + oh) * g.out[2] + rw[0], in_base + (id * g.in[1] + ih) * g.in[2] + col0,
                      widx, rw[1] - rw[0]);
                }
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

namespace ops {

/// Cross-correlation (no kernel flip) of x [N, C_in, spatial...] with
/// w [C_out, C_in/groups, kernel...].
template <typename T>
Tensor<T> conv(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& spec, Tape<T>* tape = nullptr) {
  const Shape out_shape = conv_output_shape(x.shape(), spec);
  const Shape expect_w = spec.weight_shape(x.dim(1));
  if (w.shape() != expect_w) {
    for (std::size_t i = 0; i < std::max(w.rank(), expect_w.size()); ++i) {
      if (i >= w.rank() || i >= expect_w.size() || w.dim(i) != expect_w[i]) {
        throw ShapeError("conv weight dim " + std::to_string(i) + " mismatch: expected " + shape_str(expect_w) +
                         ", got " + shape_str(w.shape()));
      }
    }
  }
  const auto g = detail::conv_geometry(x.shape(), out_shape, spec);
  Array<T> y(out_shape);
  {
    T* yp = y.data().data();
    const T* xp = x.value().data().data();
    const T* wp = w.value().data().data();
    const std::size_t sw = g.s[2];
    detail::for_each_conv_row(g, [&](std::size_t yo, std::size_t xo, std::size_t wi, std::size_t len) {
      const T wv = wp[wi];
      T* yr = yp + yo;
      const T* xr = xp + xo;
      if (sw == 1) {
        for (std::size_t i = 0; i < len; ++i) yr[i] += wv * xr[i];
      } else {
        for (std::size_t i = 0; i < len; ++i) yr[i] += wv * xr[i * sw];
      }
    });
  }
  Tensor<T> out(std::move(y));
  if (tape && Tape<T>::needs_grad({&x, &w})) {
    tape->record("conv", {x, w}, out, [x, w, out, g]() mutable {
      const T* gy = out.grad().data().data();
      const std::size_t sw = g.s[2];
      if (x.requires_grad()) {
        T* gx = x.mutable_grad().data().data();
        const T* wp = w.value().data().data();
        detail::for_each_conv_row(g, [&](std::size_t yo, std::size_t xo, std::size_t wi, std::size_t len) {
          const T wv = wp[wi];
          const T* gr = gy + yo;
          T* xr = gx + xo;
          for (std::size_t i = 0; i < len; ++i) xr[i * sw] += wv * gr[i];
        });
      }
      if (w.requires_grad()) {
        T* gw = w.mutable_grad().data().data();
        const T* xp = x.value().data().data();
        detail::for_each_conv_row(g, [&](std::size_t yo, std::size_t xo, std::size_t wi, std::size_t len) {
          const T* gr = gy + yo;
          const T* xr = xp + xo;
          T acc{0};
          for (std::size_t i = 0; i < len; ++i) acc += gr[i] * xr[i * sw];
          gw[wi] += acc;
        });
      }
    });
  }
  return out;
}

}  // namespace ops
}  // namespace lesionnet
