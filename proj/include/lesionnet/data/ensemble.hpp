#pragma once

#include <array>
#include <cmath>
#include <sstream>
#include <string>

#include "lesionnet/core/error.hpp"

namespace lesionnet {

/// Normalized per-modality weights over (FLAIR, T1w, T1Gd, T2).
class EnsembleWeights {
 public:
  explicit EnsembleWeights(std::array<double, 4> raw) : ratio_(raw) {
    double total = 0.0;
    for (double v : raw) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw DataError("ensemble weights must be finite and >= 0");
      total += v;
    }
    if (total <= 0.0) throw DataError("ensemble weights sum to 0");
    for (std::size_t i = 0; i < 4; ++i) w_[i] = raw[i] / total;
  }

  /// Parses "a:b:c:d", e.g. "3:3:3:2".
  static EnsembleWeights parse(const std::string& text) {
    std::array<double, 4> raw{};
    std::istringstream is(text);
    std::string part;
    std::size_t i = 0;
    while (std::getline(is, part, ':')) {
      if (i >= 4) throw DataError("ensemble ratio '" + text + "' must have four parts");
      try {
        std::size_t used = 0;
        raw[i] = std::stod(part, &used);
        if (used != part.size()) throw std::invalid_argument(part);
      } catch (const std::exception&) {
        throw DataError("ensemble ratio '" + text + "': '" + part + "' is not a number");
      }
      ++i;
    }
    if (i != 4) throw DataError("ensemble ratio '" + text + "' must have four parts");
    return EnsembleWeights(raw);
  }

  static EnsembleWeights preset_3332() { return EnsembleWeights({3, 3, 3, 2}); }
  static EnsembleWeights preset_2422() { return EnsembleWeights({2, 4, 2, 2}); }

  const std::array<double, 4>& weights() const { return w_; }
  const std::array<double, 4>& ratio() const { return ratio_; }
  double operator[](std::size_t i) const { return w_[i]; }

 private:
  std::array<double, 4> ratio_{};
  std::array<double, 4> w_{};
};

/// Weighted arithmetic mean of the four per-modality probabilities.
inline double ensemble_predict(const std::array<double, 4>& probs, const EnsembleWeights& w) {
  double acc = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (!(probs[i] >= 0.0 && probs[i] <= 1.0)) throw DataError("ensemble probability outside [0, 1]");
    acc += w[i] * probs[i];
  }
  return acc;
}

}  // namespace lesionnet
