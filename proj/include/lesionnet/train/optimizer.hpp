#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "lesionnet/core/module.hpp"

namespace lesionnet {

enum class OptimizerKind { adam, sgd, rmsprop, adadelta };

inline std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::rmsprop: return "rmsprop";
    case OptimizerKind::adadelta: return "adadelta";
  }
  return "?";
}

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "rmsprop") return OptimizerKind::rmsprop;
  if (s == "adadelta") return OptimizerKind::adadelta;
  throw Error("unknown optimizer '" + s + "' (expected adam, sgd, rmsprop or adadelta)");
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double rho = 0.9;  // rmsprop decay; adadelta uses rho_adadelta
  double rho_adadelta = 0.95;
  double eps = 1e-7;
  // Off: w -= lr * m / sqrt(v + eps), no bias correction.
  // On: textbook Adam, w -= lr * m_hat / (sqrt(v_hat) + eps).
  bool adam_bias_correction = false;
};

/// Per-parameter accumulators. For adadelta `m` holds the running mean of
/// squared updates and `v` the running mean of squared gradients.
template <typename T>
struct OptimizerSlot {
  Array<T> m;
  Array<T> v;
};

template <typename T>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config) : config_(config) {
    if (!(config_.lr >= 0.0) || !std::isfinite(config_.lr)) throw Error("learning rate must be finite and >= 0");
    if (!(config_.eps > 0.0)) throw Error("optimizer eps must be positive");
  }

  const OptimizerConfig& config() const { return config_; }
  std::size_t step_count() const { return t_; }
  const std::vector<OptimizerSlot<T>>& slots() const { return slots_; }

  /// Applies one update to every learnable entry using its current grad.
  /// Entries without a grad are treated as having a zero gradient.
  void step(ParameterSet<T>& ps) {
    auto params = ps.parameters();
    if (slots_.empty()) {
      for (const auto& p : params) slots_.push_back({Array<T>(p.tensor.shape(), T{0}), Array<T>(p.tensor.shape(), T{0})});
    }
    if (slots_.size() != params.size()) throw Error("optimizer state does not match parameter set");
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i].tensor;
      if (p.has_grad() && !p.grad().all_finite()) {
        throw NumericalError("non-finite gradient in parameter '" + params[i].name + "' at step " + std::to_string(t_ + 1));
      }
    }
    ++t_;
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i].tensor;
      auto& w = p.mutable_value();
      const Array<T> zero = p.has_grad() ? Array<T>{} : Array<T>(p.shape(), T{0});
      const Array<T>& g = p.has_grad() ? p.grad() : zero;
      update(w, g, slots_[i]);
    }
  }

  /// Single-parameter form of `step`, for direct use and tests.
  void step_one(Array<T>& w, const Array<T>& g, OptimizerSlot<T>& slot) {
    if (!g.all_finite()) throw NumericalError("non-finite gradient");
    ++t_;
    update(w, g, slot);
  }

 private:
  void update(Array<T>& w, const Array<T>& g, OptimizerSlot<T>& s) const {
    const T lr = static_cast<T>(config_.lr), eps = static_cast<T>(config_.eps);
    switch (config_.kind) {
      case OptimizerKind::sgd:
        for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * g[k];
        break;
      case OptimizerKind::adam: {
        const T b1 = static_cast<T>(config_.beta1), b2 = static_cast<T>(config_.beta2);
        const T c1 = static_cast<T>(1.0 - std::pow(config_.beta1, static_cast<double>(t_)));
        const T c2 = static_cast<T>(1.0 - std::pow(config_.beta2, static_cast<double>(t_)));
        for (std::size_t k = 0; k < w.size(); ++k) {
          s.m[k] = b1 * s.m[k] + (T{1} - b1) * g[k];
          s.v[k] = b2 * s.v[k] + (T{1} - b2) * g[k] * g[k];
          if (config_.adam_bias_correction) {
            w[k] -= lr * (s.m[k] / c1) / (std::sqrt(s.v[k] / c2) + eps);
          } else {
            w[k] -= lr * s.m[k] / std::sqrt(s.v[k] + eps);
          }
        }
        break;
      }
      case OptimizerKind::rmsprop: {
        const T rho = static_cast<T>(config_.rho);
        for (std::size_t k = 0; k < w.size(); ++k) {
          s.v[k] = rho * s.v[k] + (T{1} - rho) * g[k] * g[k];
          w[k] -= lr * g[k] / (std::sqrt(s.v[k]) + eps);
        }
        break;
      }
      case OptimizerKind::adadelta: {
        const T rho = static_cast<T>(config_.rho_adadelta);
        for (std::size_t k = 0; k < w.size(); ++k) {
          s.v[k] = rho * s.v[k] + (T{1} - rho) * g[k] * g[k];
          const T delta = std::sqrt(s.m[k] + eps) / std::sqrt(s.v[k] + eps) * g[k];
          s.m[k] = rho * s.m[k] + (T{1} - rho) * delta * delta;
          w[k] -= lr * delta;
        }
        break;
      }
    }
  }

  OptimizerConfig config_;
  std::vector<OptimizerSlot<T>> slots_;
  std::size_t t_ = 0;
};

}  // namespace lesionnet
