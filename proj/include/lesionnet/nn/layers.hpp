#pragma once

#include <string>

#include "lesionnet/core/module.hpp"
#include "lesionnet/core/ops.hpp"
#include "lesionnet/core/random.hpp"

namespace lesionnet {

template <typename T>
class Conv {
 public:
  Conv() = default;
  Conv(ParameterSet<T>& ps, const std::string& name, std::size_t in_channels, ConvSpec spec, bool bias, Rng& rng)
      : spec_(std::move(spec)) {
    spec_.validate();
    if (in_channels % spec_.groups != 0) {
      throw ShapeError(name + ": in_channels " + std::to_string(in_channels) + " not divisible by groups");
    }
    const Shape ws = spec_.weight_shape(in_channels);
    std::size_t fan_in = in_channels / spec_.groups;
    for (auto k : spec_.kernel) fan_in *= k;
    weight_ = ps.add_parameter(name + ".weight", he_init<T>(ws, fan_in, rng));
    if (bias) bias_ = ps.add_parameter(name + ".bias", Array<T>(Shape{spec_.out_channels}, T{0}));
  }

  Tensor<T> forward(const Tensor<T>& x, const Context<T>& ctx) const {
    auto y = ops::conv(x, weight_, spec_, ctx.tape);
    if (bias_.defined()) y = ops::add_channel_bias(y, bias_, ctx.tape);
    return y;
  }

  const ConvSpec& spec() const { return spec_; }
  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

 private:
  ConvSpec spec_;
  Tensor<T> weight_, bias_;
};

template <typename T>
class Dense {
 public:
  Dense() = default;
  Dense(ParameterSet<T>& ps, const std::string& name, std::size_t in_features, std::size_t out_features, Rng& rng) {
    weight_ = ps.add_parameter(name + ".weight", he_init<T>(Shape{out_features, in_features}, in_features, rng));
    bias_ = ps.add_parameter(name + ".bias", Array<T>(Shape{out_features}, T{0}));
  }

  Tensor<T> forward(const Tensor<T>& x, const Context<T>& ctx) const { return ops::dense(x, weight_, bias_, ctx.tape); }

  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

 private:
  Tensor<T> weight_, bias_;
};

}  // namespace lesionnet
