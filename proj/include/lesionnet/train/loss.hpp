#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "lesionnet/core/ops.hpp"

namespace lesionnet {

/// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before logs.
inline constexpr double kProbClamp = 1e-7;

struct LossBatch {
  std::vector<int> y;
  std::vector<double> p;

  void validate() const {
    if (y.empty() || y.size() != p.size()) {
      throw DataError("loss batch needs matching, non-empty label/probability lists (" + std::to_string(y.size()) +
                      " vs " + std::to_string(p.size()) + ")");
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] != 0 && y[i] != 1) throw DataError("label " + std::to_string(y[i]) + " at index " + std::to_string(i) + " is not 0 or 1");
    }
  }
};

/// Mean binary cross-entropy: -(1/n) sum y log p + (1 - y) log(1 - p).
inline double bce_loss(const LossBatch& b) {
  b.validate();
  double acc = 0.0;
  for (std::size_t i = 0; i < b.y.size(); ++i) {
    const double p = std::clamp(b.p[i], kProbClamp, 1.0 - kProbClamp);
    acc += b.y[i] ? std::log(p) : std::log(1.0 - p);
  }
  return -acc / static_cast<double>(b.y.size());
}

namespace ops {

/// Differentiable mean BCE over probabilities `p` ([N] or [N, 1]).
///
/// The backward pass differentiates the expression at the clamped
/// probability, so saturated predictions still receive a gradient.
template <typename T>
Tensor<T> bce(const Tensor<T>& p, const std::vector<int>& labels, Tape<T>* tape = nullptr) {
  if (p.size() != labels.size() || labels.empty()) {
    throw ShapeError("bce: " + std::to_string(labels.size()) + " labels for predictions " + shape_str(p.shape()));
  }
  const T lo = static_cast<T>(kProbClamp), hi = T{1} - static_cast<T>(kProbClamp);
  const auto n = static_cast<T>(labels.size());
  T acc{0};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError("label " + std::to_string(labels[i]) + " is not 0 or 1");
    const T q = std::clamp(p.value()[i], lo, hi);
    acc += labels[i] ? std::log(q) : std::log(T{1} - q);
  }
  Tensor<T> out(Array<T>::scalar(-acc / n));
  if (tape && Tape<T>::needs_grad({&p})) {
    tape->record("bce", {p}, out, [p, out, labels, lo, hi, n]() mutable {
      const T g = out.grad()[0];
      auto& gp = p.mutable_grad();
      for (std::size_t i = 0; i < labels.size(); ++i) {
        const T q = std::clamp(p.value()[i], lo, hi);
        gp[i] += g * (labels[i] ? -T{1} / q : T{1} / (T{1} - q)) / n;
      }
    });
  }
  return out;
}

/// Sigmoid followed by BCE; models emit logits and this is the training loss.
template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const std::vector<int>& labels, Tape<T>* tape = nullptr) {
  return bce(activation(logits, Activation::sigmoid, tape), labels, tape);
}

}  // namespace ops
}  // namespace lesionnet
