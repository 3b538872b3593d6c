#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "lesionnet/core/array.hpp"

namespace lesionnet {

/// Corner-aligned separable bilinear resize of an [H, W] image: output
/// pixel i samples input coordinate i * (H - 1) / (H_out - 1).
inline Array<float> resize_bilinear(const Array<float>& img, std::size_t out_h, std::size_t out_w) {
  if (img.rank() != 2) throw ShapeError("resize_bilinear expects [H, W], got " + shape_str(img.shape()));
  const std::size_t h = img.dim(0), w = img.dim(1);
  if (h < 2 || w < 2) throw ShapeError("resize_bilinear needs H, W >= 2, got " + shape_str(img.shape()));
  if (out_h < 2 || out_w < 2) throw ShapeError("resize_bilinear target must be at least 2x2");
  if (h == out_h && w == out_w) return img;

  struct Tap {
    std::size_t i0, i1;
    double f;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in - 1) / static_cast<double>(out - 1);
    for (std::size_t o = 0; o < out; ++o) {
      const double pos = static_cast<double>(o) * scale;
      const auto i0 = std::min(static_cast<std::size_t>(pos), in - 1);
      const std::size_t i1 = std::min(i0 + 1, in - 1);
      t[o] = {i0, i1, pos - static_cast<double>(i0)};
    }
    return t;
  };
  const auto ty = taps(h, out_h), tx = taps(w, out_w);
  Array<float> out(Shape{out_h, out_w});
  for (std::size_t y = 0; y < out_h; ++y) {
    for (std::size_t x = 0; x < out_w; ++x) {
      const auto& a = ty[y];
      const auto& b = tx[x];
      const double top = img[a.i0 * w + b.i0] * (1.0 - b.f) + img[a.i0 * w + b.i1] * b.f;
      const double bot = img[a.i1 * w + b.i0] * (1.0 - b.f) + img[a.i1 * w + b.i1] * b.f;
      out[y * out_w + x] = static_cast<float>(top * (1.0 - a.f) + bot * a.f);
    }
  }
  return out;
}

/// Resizes every depth slice of a [D, H, W] volume.
inline Array<float> resize_volume(const Array<float>& vol, std::size_t out_h, std::size_t out_w) {
  if (vol.rank() != 3) throw ShapeError("resize_volume expects [D, H, W], got " + shape_str(vol.shape()));
  const std::size_t d = vol.dim(0), h = vol.dim(1), w = vol.dim(2);
  if (h == out_h && w == out_w) return vol;
  Array<float> out(Shape{d, out_h, out_w});
  for (std::size_t z = 0; z < d; ++z) {
    Array<float> slice(Shape{h, w}, std::vector<float>(vol.data().begin() + static_cast<std::ptrdiff_t>(z * h * w),
                                                       vol.data().begin() + static_cast<std::ptrdiff_t>((z + 1) * h * w)));
    const auto r = resize_bilinear(slice, out_h, out_w);
    std::copy(r.data().begin(), r.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(z * out_h * out_w));
  }
  return out;
}

/// Maps 8-bit intensities [0, 255] to [0, 1]. Anything outside the source
/// range means the data was not converted to 8-bit scale and is rejected.
template <typename T>
Array<T> rescale(const Array<T>& x) {
  Array<T> out = x;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = out[i];
    if (!(v >= T{0} && v <= T{255})) {
      throw DataError("rescale input " + std::to_string(static_cast<double>(v)) + " at index " + std::to_string(i) +
                      " outside [0, 255]");
    }
    out[i] = v / T{255};
  }
  return out;
}

/// (x - mean[c]) * scale[c] per leading-axis channel; identity by default.
struct ChannelNormalization {
  std::vector<float> mean;
  std::vector<float> scale;

  bool identity() const { return mean.empty() && scale.empty(); }

  Array<float> apply(const Array<float>& x) const {
    if (identity()) return x;
    const std::size_t c = x.dim(0), plane = x.size() / c;
    if (mean.size() != c || scale.size() != c) {
      throw ShapeError("normalization has " + std::to_string(mean.size()) + " channels, input has " + std::to_string(c));
    }
    Array<float> out = x;
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < plane; ++i) out[ch * plane + i] = (out[ch * plane + i] - mean[ch]) * scale[ch];
    return out;
  }
};

}  // namespace lesionnet
