#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>

#include "lesionnet/core/error.hpp"

namespace lesionnet {

/// One row of the backbone table.
struct StageConfig {
  std::size_t expand_ratio;
  std::size_t kernel;
  std::size_t stride;
  std::size_t base_channels;
  std::size_t base_repeats;
};

/// The B0 baseline; every other variant scales these rows.
inline constexpr std::array<StageConfig, 7> kBaselineStages{{
    {1, 3, 1, 16, 1},
    {6, 3, 2, 24, 2},
    {6, 5, 2, 40, 2},
    {6, 3, 2, 80, 3},
    {6, 5, 1, 112, 3},
    {6, 5, 2, 192, 4},
    {6, 3, 1, 320, 1},
}};

inline constexpr std::size_t kBaselineStemChannels = 32;
inline constexpr std::size_t kBaselineHeadChannels = 1280;

/// Nearest multiple of 8, never below 8.
inline std::size_t round_filters(std::size_t base, double width_mult) {
  const double scaled = static_cast<double>(base) * width_mult;
  const auto r = static_cast<std::size_t>(std::floor(scaled / 8.0 + 0.5)) * 8;
  return r < 8 ? 8 : r;
}

inline std::size_t round_repeats(std::size_t base, double depth_mult) {
  // The epsilon keeps exact products such as 2 * 0.5 from rounding up.
  return static_cast<std::size_t>(std::ceil(static_cast<double>(base) * depth_mult - 1e-9));
}

struct ScaledVariant {
  double width_mult = 1.0;
  double depth_mult = 1.0;
  std::string name = "B0";

  static ScaledVariant b0() { return {1.0, 1.0, "B0"}; }
  static ScaledVariant b7() { return {2.0, 3.1, "B7"}; }
  static ScaledVariant custom(double width, double depth) {
    if (!(width > 0.0) || !(depth > 0.0)) throw Error("variant multipliers must be positive");
    return {width, depth, "custom"};
  }

  std::size_t channels(std::size_t stage) const { return round_filters(kBaselineStages.at(stage).base_channels, width_mult); }
  std::size_t repeats(std::size_t stage) const { return round_repeats(kBaselineStages.at(stage).base_repeats, depth_mult); }
  std::size_t stem_channels() const { return round_filters(kBaselineStemChannels, width_mult); }
  std::size_t head_channels() const { return round_filters(kBaselineHeadChannels, width_mult); }
};

}  // namespace lesionnet
