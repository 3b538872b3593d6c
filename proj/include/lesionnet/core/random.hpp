#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "lesionnet/core/array.hpp"

namespace lesionnet {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed for the per-sample stream of (global seed, case id, epoch).
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::string_view case_id, std::uint64_t epoch) {
  return mix_seed(mix_seed(seed ^ hash_string(case_id)) + epoch);
}

/// Normal(0, stddev) truncated to two standard deviations by resampling.
template <typename T>
Array<T> truncated_normal(Shape shape, double stddev, Rng& rng) {
  Array<T> a(std::move(shape));
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& v : a.data()) {
    double z;
    do {
      z = dist(rng);
    } while (std::abs(z) > 2.0);
    v = static_cast<T>(z * stddev);
  }
  return a;
}

/// Standard deviation of a unit normal truncated to [-2, 2].
inline constexpr double kTruncatedNormalStd = 0.87962566103423978;

/// He-style initialisation: variance 2 / fan_in after truncation.
template <typename T>
Array<T> he_init(Shape shape, std::size_t fan_in, Rng& rng) {
  const double sd = std::sqrt(2.0 / static_cast<double>(fan_in)) / kTruncatedNormalStd;
  return truncated_normal<T>(std::move(shape), sd, rng);
}

template <typename T>
Array<T> uniform_array(Shape shape, T lo, T hi, Rng& rng) {
  Array<T> a(std::move(shape));
  std::uniform_real_distribution<double> dist(static_cast<double>(lo), static_cast<double>(hi));
  for (auto& v : a.data()) v = static_cast<T>(dist(rng));
  return a;
}

}  // namespace lesionnet
