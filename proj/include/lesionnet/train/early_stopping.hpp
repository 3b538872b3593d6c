#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "lesionnet/core/module.hpp"

namespace lesionnet {

enum class StopDecision { keep_going, stop };

/// Tracks the best validation AUC and the weights that produced it.
template <typename T>
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience, double min_delta = 1e-6) : patience_(patience), min_delta_(min_delta) {}

  /// An improvement must beat the best value by at least `min_delta`; a tie
  /// counts as no improvement. On stop the best snapshot is restored.
  StopDecision update(double val_auc, ParameterSet<T>& ps) {
    ++epoch_;
    if (!has_best_ || val_auc >= best_ + min_delta_) {
      best_ = val_auc;
      has_best_ = true;
      best_epoch_ = epoch_;
      since_improve_ = 0;
      best_weights_ = ps.snapshot();
      return StopDecision::keep_going;
    }
    ++since_improve_;
    if (since_improve_ >= patience_) {
      restore_best(ps);
      return StopDecision::stop;
    }
    return StopDecision::keep_going;
  }

  void restore_best(ParameterSet<T>& ps) const {
    if (has_best_) ps.restore(best_weights_);
  }

  double best_value() const { return has_best_ ? best_ : -std::numeric_limits<double>::infinity(); }
  std::size_t best_epoch() const { return best_epoch_; }
  std::size_t epochs_since_improve() const { return since_improve_; }
  std::size_t patience() const { return patience_; }
  const std::vector<Array<T>>& best_weights() const { return best_weights_; }

 private:
  std::size_t patience_;
  double min_delta_;
  double best_ = 0.0;
  bool has_best_ = false;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t since_improve_ = 0;
  std::vector<Array<T>> best_weights_;
};

}  // namespace lesionnet
