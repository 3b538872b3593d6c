#pragma once

#include <array>
#include <string>

#include "lesionnet/nn/layers.hpp"

namespace lesionnet {

struct MultiscaleSpec {
  std::size_t pool_window = 2;
  std::array<std::size_t, 2> conv_channels{32, 64};
  std::size_t kernel = 3;

  void validate() const {
    if (pool_window == 0) throw ShapeError("multiscale pool_window must be >= 1");
    if (conv_channels[0] == 0 || conv_channels[1] == 0) throw ShapeError("multiscale conv channels must be positive");
    if (kernel % 2 == 0) throw ShapeError("multiscale kernel must be odd");
  }
};

/// Low-resolution feature branch: pool -> conv+swish -> pool -> conv+swish
/// -> global average pool, giving a [N, conv_channels[1]] vector.
template <typename T>
class MultiscaleBlock {
 public:
  MultiscaleBlock() = default;
  MultiscaleBlock(ParameterSet<T>& ps, const std::string& name, std::size_t in_channels, MultiscaleSpec spec, Rng& rng)
      : spec_(spec), name_(name), in_channels_(in_channels) {
    spec_.validate();
    conv1_ = Conv<T>(ps, name + ".conv1", in_channels, ConvSpec::uniform(2, spec_.conv_channels[0], spec_.kernel), true, rng);
    conv2_ = Conv<T>(ps, name + ".conv2", spec_.conv_channels[0],
                     ConvSpec::uniform(2, spec_.conv_channels[1], spec_.kernel), true, rng);
  }

  /// Throws if either pooling stage would not fit the input.
  void check_input(const Shape& x) const {
    if (x.size() != 4 || x[1] != in_channels_) {
      throw ShapeError(name_ + ": expected [N, " + std::to_string(in_channels_) + ", H, W], got " + shape_str(x));
    }
    for (std::size_t d = 2; d < 4; ++d) {
      std::size_t e = x[d];
      for (int stage = 1; stage <= 2; ++stage) {
        if (e < spec_.pool_window) {
          throw ShapeError(name_ + ": input extent " + std::to_string(x[d]) + " in dim " + std::to_string(d) +
                           " too small for pooling stage " + std::to_string(stage) + " (window " +
                           std::to_string(spec_.pool_window) + ")");
        }
        e = (e - spec_.pool_window) / spec_.pool_window + 1;
      }
    }
  }

  Tensor<T> forward(const Tensor<T>& x, const Context<T>& ctx) const {
    check_input(x.shape());
    const std::vector<std::size_t> win{spec_.pool_window, spec_.pool_window};
    auto h = ops::maxpool(x, win, win, ctx.tape);
    h = ops::activation(conv1_.forward(h, ctx), Activation::swish, ctx.tape);
    ctx.log(name_ + ".stage1", h.shape());
    h = ops::maxpool(h, win, win, ctx.tape);
    h = ops::activation(conv2_.forward(h, ctx), Activation::swish, ctx.tape);
    ctx.log(name_ + ".stage2", h.shape());
    return ops::global_avg_pool(h, ctx.tape);
  }

  std::size_t feature_length() const { return spec_.conv_channels[1]; }
  const MultiscaleSpec& spec() const { return spec_; }
  Conv<T>& conv1() { return conv1_; }
  Conv<T>& conv2() { return conv2_; }

 private:
  MultiscaleSpec spec_;
  std::string name_;
  std::size_t in_channels_ = 0;
  Conv<T> conv1_, conv2_;
};

}  // namespace lesionnet
