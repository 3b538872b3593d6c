#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "lesionnet/core/tensor.hpp"

namespace lesionnet {

/// Compares reverse-mode gradients with central differences.
///
/// `f(Tape<T>*)` must build a scalar from the tensors in `wrt`; it is called
/// once with a tape and 2 * (total elements) times without one. Returns the
/// max over all coordinates of
/// |analytic - (f(x+h e_i) - f(x-h e_i)) / 2h| / max(1, |analytic|).
template <typename T, typename F>
T grad_check(F&& f, std::vector<Tensor<T>> wrt, T h) {
  Tape<T> tape;
  Tensor<T> loss = f(&tape);
  if (loss.size() != 1) throw TapeError("grad_check requires a scalar function, got " + shape_str(loss.shape()));
  for (auto& t : wrt) t.clear_grad();
  if (loss.tape_id() == tape.id()) {
    tape.backward(loss);
  }
  T worst{0};
  for (auto& t : wrt) {
    const Array<T> analytic = t.has_grad() ? t.grad() : Array<T>(t.shape(), T{0});
    auto& v = t.mutable_value();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const T saved = v[i];
      v[i] = saved + h;
      const T up = f(nullptr).item();
      v[i] = saved - h;
      const T down = f(nullptr).item();
      v[i] = saved;
      const T numeric = (up - down) / (T{2} * h);
      const T err = std::abs(analytic[i] - numeric) / std::max(T{1}, std::abs(analytic[i]));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

template <typename T, typename F>
T grad_check(F&& f, Tensor<T> x, T h) {
  return grad_check<T>(std::forward<F>(f), std::vector<Tensor<T>>{std::move(x)}, h);
}

}  // namespace lesionnet
