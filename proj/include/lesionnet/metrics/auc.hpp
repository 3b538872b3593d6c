#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "lesionnet/core/error.hpp"

namespace lesionnet {

/// Scores split by true label: `neg` for label 0, `pos` for label 1.
struct ScoredDataset {
  std::vector<double> neg;
  std::vector<double> pos;

  static ScoredDataset from_labels(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
    ScoredDataset d;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (labels[i] == 0) {
        d.neg.push_back(scores[i]);
      } else if (labels[i] == 1) {
        d.pos.push_back(scores[i]);
      } else {
        throw DataError("label at index " + std::to_string(i) + " is not 0 or 1");
      }
    }
    return d;
  }

  void validate() const {
    if (neg.empty() || pos.empty()) {
      throw DegenerateLabels(std::to_string(neg.size()) + " negatives, " + std::to_string(pos.size()) + " positives");
    }
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(neg.begin(), neg.end(), finite) || !std::all_of(pos.begin(), pos.end(), finite)) {
      throw DataError("scores must be finite");
    }
  }
};

enum class TieMode { strict, half };

/// Fraction of (negative, positive) pairs ranked correctly.
///
/// `strict` counts only neg < pos; `half` gives ties half credit. Pair
/// counts are accumulated as integers, so the result is exact up to the
/// final division.
inline double auc_wmw(const ScoredDataset& d, TieMode ties = TieMode::half) {
  d.validate();
  std::vector<double> neg = d.neg;
  std::sort(neg.begin(), neg.end());
  std::uint64_t twice_credit = 0;
  for (double p : d.pos) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), p);
    const auto less = static_cast<std::uint64_t>(lo - neg.begin());
    twice_credit += 2 * less;
    if (ties == TieMode::half) {
      const auto hi = std::upper_bound(lo, neg.end(), p);
      twice_credit += static_cast<std::uint64_t>(hi - lo);
    }
  }
  const double pairs = static_cast<double>(neg.size()) * static_cast<double>(d.pos.size());
  return static_cast<double>(twice_credit) / (2.0 * pairs);
}

struct RocPoint {
  double fpr;
  double tpr;
};

using RocCurve = std::vector<RocPoint>;

/// Empirical ROC over the distinct observed scores, from threshold +inf
/// (point (0,0)) down to the minimum score (point (1,1)). A sample counts
/// as predicted positive when its score is >= the threshold.
inline RocCurve roc_points(const ScoredDataset& d) {
  d.validate();
  struct Item {
    double score;
    int label;
  };
  std::vector<Item> items;
  items.reserve(d.neg.size() + d.pos.size());
  for (double s : d.neg) items.push_back({s, 0});
  for (double s : d.pos) items.push_back({s, 1});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score > b.score; });

  const double n_neg = static_cast<double>(d.neg.size());
  const double n_pos = static_cast<double>(d.pos.size());
  RocCurve curve{{0.0, 0.0}};
  std::size_t fp = 0, tp = 0;
  for (std::size_t i = 0; i < items.size();) {
    const double t = items[i].score;
    while (i < items.size() && items[i].score == t) {
      (items[i].label == 1 ? tp : fp) += 1;
      ++i;
    }
    curve.push_back({static_cast<double>(fp) / n_neg, static_cast<double>(tp) / n_pos});
  }
  return curve;
}

/// Area under `roc_points` by the trapezoid rule.
inline double auc_trapezoid(const ScoredDataset& d) {
  const RocCurve c = roc_points(d);
  double area = 0.0;
  for (std::size_t i = 1; i < c.size(); ++i) area += (c[i].fpr - c[i - 1].fpr) * (c[i].tpr + c[i - 1].tpr) * 0.5;
  return area;
}

}  // namespace lesionnet
