#pragma once

#include <string>

#include "lesionnet/nn/batchnorm.hpp"
#include "lesionnet/nn/squeeze_excite.hpp"

namespace lesionnet {

/// Mobile inverted residual bottleneck configuration.
///
/// For rank 3 the stride applies to H and W only; the depth stride is 1.
struct MBConvSpec {
  int rank = 2;
  std::size_t expand_ratio = 1;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  double se_ratio = 0.25;
  bool require_skip = false;

  bool has_skip() const { return stride == 1 && in_channels == out_channels; }
  std::size_t expanded_channels() const { return in_channels * expand_ratio; }

  std::vector<std::size_t> spatial_stride() const {
    if (rank == 3) return {1, stride, stride};
    return {stride, stride};
  }

  void validate() const {
    if (rank != 2 && rank != 3) throw ShapeError("MBConv rank must be 2 or 3");
    if (expand_ratio == 0) throw ShapeError("MBConv expand_ratio must be positive");
    if (kernel % 2 == 0) throw ShapeError("MBConv kernel must be odd, got " + std::to_string(kernel));
    if (stride != 1 && stride != 2) throw ShapeError("MBConv stride must be 1 or 2, got " + std::to_string(stride));
    if (in_channels == 0 || out_channels == 0) throw ShapeError("MBConv channel counts must be positive");
    if (!(se_ratio > 0.0 && se_ratio <= 1.0)) throw ShapeError("MBConv se_ratio must be in (0, 1]");
    if (require_skip && !has_skip()) {
      throw ShapeError("MBConv skip connection requires stride 1 and in_channels == out_channels (stride " +
                       std::to_string(stride) + ", " + std::to_string(in_channels) + " -> " +
                       std::to_string(out_channels) + ")");
    }
  }
};

/// [1x1 expand + BN + swish] -> depthwise conv + BN + swish -> SE ->
/// 1x1 project + BN -> [+ input].
template <typename T>
class MBConv {
 public:
  MBConv() = default;
  MBConv(ParameterSet<T>& ps, const std::string& name, MBConvSpec spec, Rng& rng) : spec_(spec), name_(name) {
    spec_.validate();
    const std::size_t ce = spec_.expanded_channels();
    if (spec_.expand_ratio != 1) {
      expand_conv_ = Conv<T>(ps, name + ".expand_conv", spec_.in_channels, ConvSpec::uniform(spec_.rank, ce, 1), false, rng);
      expand_bn_ = BatchNorm<T>(ps, name + ".expand_bn", ce);
    }
    ConvSpec dw;
    dw.rank = spec_.rank;
    dw.kernel.assign(static_cast<std::size_t>(spec_.rank), spec_.kernel);
    dw.stride = spec_.spatial_stride();
    dw.padding = Padding::same;
    dw.groups = ce;
    dw.out_channels = ce;
    dw_conv_ = Conv<T>(ps, name + ".dw_conv", ce, dw, false, rng);
    dw_bn_ = BatchNorm<T>(ps, name + ".dw_bn", ce);
    se_ = SqueezeExcite<T>(ps, name + ".se", ce, spec_.se_ratio, rng);
    project_conv_ =
        Conv<T>(ps, name + ".project_conv", ce, ConvSpec::uniform(spec_.rank, spec_.out_channels, 1), false, rng);
    project_bn_ = BatchNorm<T>(ps, name + ".project_bn", spec_.out_channels);
  }

  Tensor<T> forward(const Tensor<T>& x, const Context<T>& ctx) {
    if (x.rank() != static_cast<std::size_t>(spec_.rank) + 2 || x.dim(1) != spec_.in_channels) {
      throw ShapeError(name_ + ": expected [N, " + std::to_string(spec_.in_channels) + ", " +
                       std::to_string(spec_.rank) + " spatial dims], got " + shape_str(x.shape()));
    }
    Tensor<T> h = x;
    if (spec_.expand_ratio != 1) {
      h = ops::activation(expand_bn_.forward(expand_conv_.forward(h, ctx), ctx), Activation::swish, ctx.tape);
    }
    h = ops::activation(dw_bn_.forward(dw_conv_.forward(h, ctx), ctx), Activation::swish, ctx.tape);
    h = se_.forward(h, ctx);
    h = project_bn_.forward(project_conv_.forward(h, ctx), ctx);
    if (spec_.has_skip()) h = ops::add(h, x, ctx.tape);
    ctx.log(name_, h.shape());
    return h;
  }

  /// Output shape for a given input shape, without running the block.
  Shape output_shape(const Shape& in) const {
    Shape out = in;
    out[1] = spec_.out_channels;
    const auto st = spec_.spatial_stride();
    for (std::size_t i = 0; i < st.size(); ++i) out[i + 2] = conv_out_extent(in[i + 2], spec_.kernel, st[i], Padding::same);
    return out;
  }

  const MBConvSpec& spec() const { return spec_; }
  const std::string& name() const { return name_; }
  Conv<T>& expand_conv() { return expand_conv_; }
  Conv<T>& dw_conv() { return dw_conv_; }
  Conv<T>& project_conv() { return project_conv_; }
  SqueezeExcite<T>& se() { return se_; }

 private:
  MBConvSpec spec_;
  std::string name_;
  Conv<T> expand_conv_;
  BatchNorm<T> expand_bn_;
  Conv<T> dw_conv_;
  BatchNorm<T> dw_bn_;
  SqueezeExcite<T> se_;
  Conv<T> project_conv_;
  BatchNorm<T> project_bn_;
};

}  // namespace lesionnet
