#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "lesionnet/core/array.hpp"
#include "lesionnet/core/random.hpp"

namespace lesionnet {

/// One draw of the flip/rotate augmentation.
struct AugmentParams {
  bool hflip = false;
  bool vflip = false;
  double angle_deg = 0.0;
};

struct AugmentConfig {
  double flip_probability = 0.5;
  /// Rotation angle is uniform in +-rotation_factor * 180 degrees.
  double rotation_factor = 0.2;
};

inline AugmentParams sample_augment(Rng& rng, const AugmentConfig& cfg = {}) {
  std::bernoulli_distribution flip(cfg.flip_probability);
  const double max_deg = cfg.rotation_factor * 180.0;
  std::uniform_real_distribution<double> angle(-max_deg, max_deg);
  AugmentParams p;
  p.hflip = flip(rng);
  p.vflip = flip(rng);
  p.angle_deg = max_deg > 0.0 ? angle(rng) : 0.0;
  return p;
}

inline Array<float> hflip(const Array<float>& img) {
  const std::size_t h = img.dim(0), w = img.dim(1);
  Array<float> out(img.shape());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) out[y * w + x] = img[y * w + (w - 1 - x)];
  return out;
}

inline Array<float> vflip(const Array<float>& img) {
  const std::size_t h = img.dim(0), w = img.dim(1);
  Array<float> out(img.shape());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) out[y * w + x] = img[(h - 1 - y) * w + x];
  return out;
}

/// Rotation about the image centre with bilinear sampling; samples falling
/// outside the image read as zero.
inline Array<float> rotate(const Array<float>& img, double angle_deg) {
  if (angle_deg == 0.0) return img;
  const std::size_t h = img.dim(0), w = img.dim(1);
  const double th = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(th), s = std::sin(th);
  const double cy = (static_cast<double>(h) - 1.0) / 2.0, cx = (static_cast<double>(w) - 1.0) / 2.0;
  auto at = [&](std::ptrdiff_t y, std::ptrdiff_t x) -> double {
    if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(h) || x >= static_cast<std::ptrdiff_t>(w)) return 0.0;
    return img[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
  };
  Array<float> out(img.shape());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
      // inverse map: rotate the output coordinate by -angle
      const double sy = c * dy - s * dx + cy;
      const double sx = s * dy + c * dx + cx;
      const double fy = std::floor(sy), fx = std::floor(sx);
      const double ay = sy - fy, ax = sx - fx;
      const auto iy = static_cast<std::ptrdiff_t>(fy), ix = static_cast<std::ptrdiff_t>(fx);
      const double v = (at(iy, ix) * (1 - ax) + at(iy, ix + 1) * ax) * (1 - ay) +
                       (at(iy + 1, ix) * (1 - ax) + at(iy + 1, ix + 1) * ax) * ay;
      out[y * w + x] = static_cast<float>(v);
    }
  }
  return out;
}

/// Applies the same transform to every trailing [H, W] plane of `x`.
inline Array<float> apply_augment(const Array<float>& x, const AugmentParams& p) {
  if (x.rank() < 2) throw ShapeError("augment expects at least [H, W], got " + shape_str(x.shape()));
  if (!p.hflip && !p.vflip && p.angle_deg == 0.0) return x;
  const std::size_t h = x.dim(x.rank() - 2), w = x.dim(x.rank() - 1), planes = x.size() / (h * w);
  Array<float> out(x.shape());
  for (std::size_t k = 0; k < planes; ++k) {
    const auto first = x.data().begin() + static_cast<std::ptrdiff_t>(k * h * w);
    Array<float> plane(Shape{h, w}, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(h * w)));
    if (p.hflip) plane = hflip(plane);
    if (p.vflip) plane = vflip(plane);
    plane = rotate(plane, p.angle_deg);
    std::copy(plane.data().begin(), plane.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(k * h * w));
  }
  return out;
}

inline Array<float> augment(const Array<float>& x, Rng& rng, const AugmentConfig& cfg = {}) {
  return apply_augment(x, sample_augment(rng, cfg));
}

}  // namespace lesionnet
