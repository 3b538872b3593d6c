#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "lesionnet/nn/layers.hpp"

namespace lesionnet {

inline std::size_t se_reduced_channels(std::size_t channels, double se_ratio) {
  if (!(se_ratio > 0.0 && se_ratio <= 1.0)) throw Error("se_ratio must be in (0, 1]");
  const auto r = static_cast<std::size_t>(std::lround(static_cast<double>(channels) * se_ratio));
  return std::max<std::size_t>(1, r);
}

/// Squeeze-and-excitation channel gate:
/// GAP -> dense(C, r) -> swish -> dense(r, C) -> sigmoid -> x * gate.
template <typename T>
class SqueezeExcite {
 public:
  SqueezeExcite() = default;
  SqueezeExcite(ParameterSet<T>& ps, const std::string& name, std::size_t channels, double se_ratio, Rng& rng)
      : channels_(channels) {
    const std::size_t reduced = se_reduced_channels(channels, se_ratio);
    reduce_ = Dense<T>(ps, name + ".reduce", channels, reduced, rng);
    expand_ = Dense<T>(ps, name + ".expand", reduced, channels, rng);
  }

  Tensor<T> forward(const Tensor<T>& x, const Context<T>& ctx) const {
    if (x.rank() < 3 || x.dim(1) != channels_) {
      throw ShapeError("squeeze-excite built for " + std::to_string(channels_) + " channels, got input " +
                       shape_str(x.shape()));
    }
    auto s = ops::global_avg_pool(x, ctx.tape);
    s = ops::activation(reduce_.forward(s, ctx), Activation::swish, ctx.tape);
    auto gate = ops::activation(expand_.forward(s, ctx), Activation::sigmoid, ctx.tape);
    return ops::scale_channels(x, gate, ctx.tape);
  }

  Dense<T>& reduce() { return reduce_; }
  Dense<T>& expand() { return expand_; }

 private:
  std::size_t channels_ = 0;
  Dense<T> reduce_, expand_;
};

}  // namespace lesionnet
