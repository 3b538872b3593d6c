#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "lesionnet/core/conv.hpp"
#include "lesionnet/core/tensor.hpp"

namespace lesionnet {

enum class Activation { relu, sigmoid, swish };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::swish: return "swish";
  }
  return "?";
}

/// Overflow-free logistic function.
template <typename T>
T stable_sigmoid(T z) {
  if (z >= T{0}) return T{1} / (T{1} + std::exp(-z));
  const T e = std::exp(z);
  return e / (T{1} + e);
}

namespace detail {

inline void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

/// Number of elements per (n, c) plane of an [N, C, spatial...] tensor.
inline std::size_t spatial_size(const Shape& s) {
  std::size_t v = 1;
  for (std::size_t i = 2; i < s.size(); ++i) v *= s[i];
  return v;
}

}  // namespace detail

namespace ops {

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape = nullptr) {
  detail::require_same_shape(a.shape(), b.shape(), "add");
  Array<T> y = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  Tensor<T> out(std::move(y));
  if (tape && Tape<T>::needs_grad({&a, &b})) {
    tape->record("add", {a, b}, out, [a, b, out]() mutable {
      const auto& g = out.grad();
      for (const Tensor<T>* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto& gt = t->mutable_grad();
        for (std::size_t i = 0; i < gt.size(); ++i) gt[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape = nullptr) {
  detail::require_same_shape(a.shape(), b.shape(), "mul");
  Array<T> y = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  Tensor<T> out(std::move(y));
  if (tape && Tape<T>::needs_grad({&a, &b})) {
    tape->record("mul", {a, b}, out, [a, b, out]() mutable {
      const auto& g = out.grad();
      if (a.requires_grad()) {
        auto& ga = a.mutable_grad();
        const auto& bv = b.value();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bv[i];
      }
      if (b.requires_grad()) {
        auto& gb = b.mutable_grad();
        const auto& av = a.value();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av[i];
      }
    });
  }
  return out;
}

/// Sum of all elements as a scalar tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& x, Tape<T>* tape = nullptr) {
  T acc{0};
  for (T v : x.value().data()) acc += v;
  Tensor<T> out(Array<T>::scalar(acc));
  if (tape && Tape<T>::needs_grad({&x})) {
    tape->record("sum", {x}, out, [x, out]() mutable {
      const T g = out.grad()[0];
      auto& gx = x.mutable_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Activation kind, Tape<T>* tape = nullptr) {
  Array<T> y(x.shape());
  const auto xv = x.value().data();
  switch (kind) {
    case Activation::relu:
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] > T{0} ? xv[i] : T{0};
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = stable_sigmoid(xv[i]);
      break;
    case Activation::swish:
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] * stable_sigmoid(xv[i]);
      break;
  }
  Tensor<T> out(std::move(y));
  if (tape && Tape<T>::needs_grad({&x})) {
    tape->record("activation:" + to_string(kind), {x}, out, [x, out, kind]() mutable {
      const auto& g = out.grad();
      const auto& xv = x.value();
      auto& gx = x.mutable_grad();
      switch (kind) {
        case Activation::relu:
          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += xv[i] > T{0} ? g[i] : T{0};
          break;
        case Activation::sigmoid: {
          const auto& yv = out.value();
          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * yv[i] * (T{1} - yv[i]);
          break;
        }
        case Activation::swish:
          for (std::size_t i = 0; i < gx.size(); ++i) {
            const T s = stable_sigmoid(xv[i]);
            gx[i] += g[i] * (s + xv[i] * s * (T{1} - s));
          }
          break;
      }
    });
  }
  return out;
}

/// x [N, F_in] times w [F_out, F_in] transposed, plus bias [F_out].
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, Tape<T>* tape = nullptr) {
  if (x.rank() != 2) throw ShapeError("dense expects input [N, F], got " + shape_str(x.shape()));
  if (w.rank() != 2) throw ShapeError("dense weight must be [F_out, F_in], got " + shape_str(w.shape()));
  const std::size_t n = x.dim(0), fin = x.dim(1), fout = w.dim(0);
  if (w.dim(1) != fin) {
    throw ShapeError("dense inner dim mismatch: input dim 1 = " + std::to_string(fin) + ", weight dim 1 = " +
                     std::to_string(w.dim(1)));
  }
  if (b.shape() != Shape{fout}) throw ShapeError("dense bias must be [" + std::to_string(fout) + "]");
  Array<T> y(Shape{n, fout});
  const T* xp = x.value().data().data();
  const T* wp = w.value().data().data();
  const T* bp = b.value().data().data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t o = 0; o < fout; ++o) {
      T acc{0};
      for (std::size_t k = 0; k < fin; ++k) acc += xp[i * fin + k] * wp[o * fin + k];
      y[i * fout + o] = acc + bp[o];
    }
  }
  Tensor<T> out(std::move(y));
  if (tape && Tape<T>::needs_grad({&x, &w, &b})) {
    tape->record("dense", {x, w, b}, out, [x, w, b, out, n, fin, fout]() mutable {
      const auto& g = out.grad();
      if (x.requires_grad()) {
        auto& gx = x.mutable_grad();
        const auto& wv = w.value();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t o = 0; o < fout; ++o) {
            const T go = g[i * fout + o];
            for (std::size_t k = 0; k < fin; ++k) gx[i * fin + k] += go * wv[o * fin + k];
          }
      }
      if (w.requires_grad()) {
        auto& gw = w.mutable_grad();
        const auto& xv = x.value();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t o = 0; o < fout; ++o) {
            const T go = g[i * fout + o];
            for (std::size_t k = 0; k < fin; ++k) gw[o * fin + k] += go * xv[i * fin + k];
          }
      }
      if (b.requires_grad()) {
        auto& gb = b.mutable_grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t o = 0; o < fout; ++o) gb[o] += g[i * fout + o];
      }
    });
  }
  return out;
}

/// Mean over every spatial position: [N, C, spatial...] -> [N, C].
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x, Tape<T>* tape = nullptr) {
  if (x.rank() < 3) throw ShapeError("global_avg_pool expects [N, C, spatial...], got " + shape_str(x.shape()));
  const std::size_t planes = x.dim(0) * x.dim(1), sp = detail::spatial_size(x.shape());
  Array<T> y(Shape{x.dim(0), x.dim(1)});
  const T* xp = x.value().data().data();
  for (std::size_t p = 0; p < planes; ++p) {
    T acc{0};
    for (std::size_t i = 0; i < sp; ++i) acc += xp[p * sp + i];
    y[p] = acc / static_cast<T>(sp);
  }
  Tensor<T> out(std::move(y));
  if (tape && Tape<T>::needs_grad({&x})) {
    tape->record("global_avg_pool", {x}, out, [x, out, planes, sp]() mutable {
      const auto& g = out.grad();
      auto& gx = x.mutable_grad();
      for (std::size_t p = 0; p < planes; ++p) {
        const T gv = g[p] / static_cast<T>(sp);
        for (std::size_t i = 0; i < sp; ++i) gx[p * sp + i] += gv;
      }
    });
  }
  return out;
}

/// VALID max pooling over the spatial dims of [N, C, spatial...].
template <typename T>
Tensor<T> maxpool(const Tensor<T>& x, const std::vector<std::size_t>& window, const std::vector<std::size_t>& stride,
                  Tape<T>* tape = nullptr) {
  const std::size_t rank = x.rank() >= 2 ? x.rank() - 2 : 0;
  if (rank != 2 && rank != 3) throw ShapeError("maxpool expects rank-2 or rank-3 spatial input, got " + shape_str(x.shape()));
  if (window.size() != rank || stride.size() != rank) throw ShapeError("maxpool window/stride length must equal spatial rank");
  std::array<std::size_t, 3> in{1, 1, 1}, out{1, 1, 1}, k{1, 1, 1}, s{1, 1, 1};
  const std::size_t off = 3 - rank;
  Shape out_shape{x.dim(0), x.dim(1)};
  for (std::size_t i = 0; i < rank; ++i) {
    if (window[i] == 0 || stride[i] == 0) throw ShapeError("maxpool window and stride must be >= 1");
    if (window[i] > x.dim(i + 2)) {
      throw ShapeError("maxpool window " + std::to_string(window[i]) + " larger than input extent " +
                       std::to_string(x.dim(i + 2)) + " in dim " + std::to_string(i + 2));
    }
    in[i + off] = x.dim(i + 2);
    k[i + off] = window[i];
    s[i + off] = stride[i];
    out[i + off] = (in[i + off] - window[i]) / stride[i] + 1;
    out_shape.push_back(out[i + off]);
  }
  const std::size_t planes = x.dim(0) * x.dim(1);
  const std::size_t ip = in[0] * in[1] * in[2], op = out[0] * out[1] * out[2];
  Array<T> y(out_shape);
  std::vector<std::size_t> argmax(y.size());
  const T* xp = x.value().data().data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t od = 0; od < out[0]; ++od)
      for (std::size_t oh = 0; oh < out[1]; ++oh)
        for (std::size_t ow = 0; ow < out[2]; ++ow) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t best_i = 0;
          for (std::size_t kd = 0; kd < k[0]; ++kd)
            for (std::size_t kh = 0; kh < k[1]; ++kh)
              for (std::size_t kw = 0; kw < k[2]; ++kw) {
                const std::size_t idx =
                    p * ip + ((od * s[0] + kd) * in[1] + (oh * s[1] + kh)) * in[2] + (ow * s[2] + kw);
                if (xp[idx] > best || kd + kh + kw == 0) {
                  best = xp[idx];
                  best_i = idx;
                }
              }
          const std::size_t o = p * op + (od * out[1] + oh) * out[2] + ow;
          y[o] = best;
          argmax[o] = best_i;
        }
  }
  Tensor<T> result(std::move(y));
  if (tape && Tape<T>::needs_grad({&x})) {
    tape->record("maxpool", {x}, result, [x, result, argmax = std::move(argmax)]() mutable {
      const auto& g = result.grad();
      auto& gx = x.mutable_grad();
      for (std::size_t o = 0; o < argmax.size(); ++o) gx[argmax[o]] += g[o];
    });
  }
  return result;
}

/// Multiplies each (n, c) plane of x [N, C, spatial...] by gate[n, c].
template <typename T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& gate, Tape<T>* tape = nullptr) {
  if (x.rank() < 3 || gate.shape() != Shape{x.dim(0), x.dim(1)}) {
    throw ShapeError("scale_channels: gate " + shape_str(gate.shape()) + " does not match input " + shape_str(x.shape()));
  }
  const std::size_t planes = x.dim(0) * x.dim(1), sp = detail::spatial_size(x.shape());
  Array<T> y = x.value();
  for (std::size_t p = 0; p < planes; ++p) {
    const T gv = gate.value()[p];
    for (std::size_t i = 0; i < sp; ++i) y[p * sp + i] *= gv;
  }
  Tensor<T> out(std::move(y));
  if (tape && Tape<T>::needs_grad({&x, &gate})) {
    tape->record("scale_channels", {x, gate}, out, [x, gate, out, planes, sp]() mutable {
      const auto& g = out.grad();
      if (x.requires_grad()) {
        auto& gx = x.mutable_grad();
        for (std::size_t p = 0; p < planes; ++p) {
          const T gv = gate.value()[p];
          for (std::size_t i = 0; i < sp; ++i) gx[p * sp + i] += g[p * sp + i] * gv;
        }
      }
      if (gate.requires_grad()) {
        auto& gg = gate.mutable_grad();
        const auto& xv = x.value();
        for (std::size_t p = 0; p < planes; ++p) {
          T acc{0};
          for (std::size_t i = 0; i < sp; ++i) acc += g[p * sp + i] * xv[p * sp + i];
          gg[p] += acc;
        }
      }
    });
  }
  return out;
}

/// Adds bias[c] to every element of channel c.
template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& bias, Tape<T>* tape = nullptr) {
  if (x.rank() < 2 || bias.shape() != Shape{x.dim(1)}) {
    throw ShapeError("add_channel_bias: bias " + shape_str(bias.shape()) + " does not match channels of " +
                     shape_str(x.shape()));
  }
  const std::size_t n = x.dim(0), c = x.dim(1), sp = detail::spatial_size(x.shape());
  Array<T> y = x.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t j = 0; j < sp; ++j) y[(i * c + ch) * sp + j] += bias.value()[ch];
  Tensor<T> out(std::move(y));
  if (tape && Tape<T>::needs_grad({&x, &bias})) {
    tape->record("add_channel_bias", {x, bias}, out, [x, bias, out, n, c, sp]() mutable {
      const auto& g = out.grad();
      if (x.requires_grad()) {
        auto& gx = x.mutable_grad();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
      }
      if (bias.requires_grad()) {
        auto& gb = bias.mutable_grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t j = 0; j < sp; ++j) gb[ch] += g[(i * c + ch) * sp + j];
      }
    });
  }
  return out;
}

/// Row-wise concatenation of [N, F1] and [N, F2] into [N, F1 + F2].
template <typename T>
Tensor<T> concat_features(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape = nullptr) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) {
    throw ShapeError("concat_features: incompatible " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t n = a.dim(0), fa = a.dim(1), fb = b.dim(1);
  Array<T> y(Shape{n, fa + fb});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < fa; ++j) y[i * (fa + fb) + j] = a.value()[i * fa + j];
    for (std::size_t j = 0; j < fb; ++j) y[i * (fa + fb) + fa + j] = b.value()[i * fb + j];
  }
  Tensor<T> out(std::move(y));
  if (tape && Tape<T>::needs_grad({&a, &b})) {
    tape->record("concat_features", {a, b}, out, [a, b, out, n, fa, fb]() mutable {
      const auto& g = out.grad();
      if (a.requires_grad()) {
        auto& ga = a.mutable_grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < fa; ++j) ga[i * fa + j] += g[i * (fa + fb) + j];
      }
      if (b.requires_grad()) {
        auto& gb = b.mutable_grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < fb; ++j) gb[i * fb + j] += g[i * (fa + fb) + fa + j];
      }
    });
  }
  return out;
}

}  // namespace ops
}  // namespace lesionnet
