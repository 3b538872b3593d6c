#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lesionnet/core/error.hpp"
#include "lesionnet/core/random.hpp"

namespace lesionnet {

inline constexpr double kTrainFraction = 0.75;

struct SplitIndex {
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  std::uint64_t seed = 0;
};

inline std::size_t train_count(std::size_t total) {
  return static_cast<std::size_t>(std::lround(kTrainFraction * static_cast<double>(total)));
}

/// Case-level split: ids are sorted, shuffled by `seed`, and the first
/// round(0.75 n) go to training. Input order does not matter.
inline SplitIndex split(std::vector<std::string> ids, std::uint64_t seed) {
  if (ids.size() < 4) throw DataError("need >= 4 cases to split, got " + std::to_string(ids.size()));
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw DataError("duplicate case id in split input");
  Rng rng(mix_seed(seed));
  // Fisher-Yates with an explicit bounded draw so the order does not depend
  // on the standard library's distribution implementation.
  for (std::size_t i = ids.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(ids[i], ids[j]);
  }
  const std::size_t n_train = train_count(ids.size());
  SplitIndex s;
  s.seed = seed;
  s.train_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  return s;
}

}  // namespace lesionnet
