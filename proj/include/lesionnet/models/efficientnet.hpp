#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lesionnet/models/scaling.hpp"
#include "lesionnet/nn/batchnorm.hpp"
#include "lesionnet/nn/mbconv.hpp"
#include "lesionnet/nn/multiscale.hpp"

namespace lesionnet {

/// Shape a model accepts, batch dimension excluded.
struct InputContract {
  int rank = 2;
  std::size_t channels = 1;
  std::vector<std::size_t> spatial;

  Shape batch_shape(std::size_t n) const {
    Shape s{n, channels};
    s.insert(s.end(), spatial.begin(), spatial.end());
    return s;
  }
};

/// A binary classifier emitting one raw logit per sample.
template <typename T>
class Model {
 public:
  virtual ~Model() = default;

  /// [N, channels, spatial...] -> [N, 1] logits.
  virtual Tensor<T> forward(const Tensor<T>& x, const Context<T>& ctx) = 0;

  /// Layer output shapes computed arithmetically, in forward-log order.
  virtual ShapeLog trace(const Shape& input) const = 0;

  virtual std::string describe() const = 0;

  ParameterSet<T>& parameters() { return params_; }
  const ParameterSet<T>& parameters() const { return params_; }
  const InputContract& input_contract() const { return contract_; }

 protected:
  ParameterSet<T> params_;
  InputContract contract_;
};

template <typename T>
std::size_t param_count(const Model<T>& m) {
  return m.parameters().parameter_count();
}

/// Stem conv, seven MBConv stages and the 1x1 head conv, ending in GAP.
template <typename T>
class EfficientNetBackbone {
 public:
  EfficientNetBackbone() = default;
  EfficientNetBackbone(ParameterSet<T>& ps, const std::string& name, int rank, ScaledVariant variant,
                       std::size_t in_channels, Rng& rng)
      : name_(name), rank_(rank), variant_(std::move(variant)), in_channels_(in_channels) {
    if (rank != 2 && rank != 3) throw ShapeError("EfficientNet rank must be 2 or 3");
    ConvSpec stem = ConvSpec::uniform(rank, variant_.stem_channels(), 3, 2);
    if (rank == 3) stem.stride = {1, 2, 2};
    stem_conv_ = Conv<T>(ps, name + ".stem.conv", in_channels, stem, false, rng);
    stem_bn_ = BatchNorm<T>(ps, name + ".stem.bn", variant_.stem_channels());
    std::size_t channels = variant_.stem_channels();
    for (std::size_t s = 0; s < kBaselineStages.size(); ++s) {
      const auto& row = kBaselineStages[s];
      const std::size_t out = variant_.channels(s);
      for (std::size_t r = 0; r < variant_.repeats(s); ++r) {
        MBConvSpec spec;
        spec.rank = rank;
        spec.expand_ratio = row.expand_ratio;
        spec.kernel = row.kernel;
        spec.stride = r == 0 ? row.stride : 1;
        spec.in_channels = channels;
        spec.out_channels = out;
        blocks_.emplace_back(ps, block_name(s, r), spec, rng);
        stage_of_.push_back(s);
        channels = out;
      }
    }
    head_conv_ = Conv<T>(ps, name + ".head.conv", channels, ConvSpec::uniform(rank, variant_.head_channels(), 1), false, rng);
    head_bn_ = BatchNorm<T>(ps, name + ".head.bn", variant_.head_channels());
  }

  std::size_t feature_length() const { return variant_.head_channels(); }
  const ScaledVariant& variant() const { return variant_; }
  std::vector<MBConv<T>>& blocks() { return blocks_; }

  Tensor<T> features(const Tensor<T>& x, const Context<T>& ctx) {
    auto h = ops::activation(stem_bn_.forward(stem_conv_.forward(x, ctx), ctx), Activation::swish, ctx.tape);
    ctx.log(name_ + ".stem", h.shape());
    for (auto& b : blocks_) h = b.forward(h, ctx);
    h = ops::activation(head_bn_.forward(head_conv_.forward(h, ctx), ctx), Activation::swish, ctx.tape);
    ctx.log(name_ + ".head", h.shape());
    h = ops::global_avg_pool(h, ctx.tape);
    ctx.log(name_ + ".gap", h.shape());
    return h;
  }

  /// Symbolic shape walk; rejects inputs whose extent drops below a stride.
  ShapeLog trace(const Shape& input) const {
    if (input.size() != static_cast<std::size_t>(rank_) + 2 || input[1] != in_channels_) {
      throw ShapeError(name_ + ": expected input [N, " + std::to_string(in_channels_) + ", " +
                       std::to_string(rank_) + " spatial dims], got " + shape_str(input));
    }
    ShapeLog log;
    Shape h = input;
    const std::size_t first_strided = rank_ == 3 ? 3 : 2;
    auto stride_down = [&](const std::string& where, std::size_t stride) {
      for (std::size_t d = first_strided; d < h.size(); ++d) {
        if (h[d] < stride) {
          throw ShapeError("input " + shape_str(input) + " too small: " + where + " needs spatial extent >= " +
                           std::to_string(stride) + " in dim " + std::to_string(d) + ", has " + std::to_string(h[d]));
        }
        h[d] = conv_out_extent(h[d], 3, stride, Padding::same);
      }
    };
    stride_down("stem", 2);
    h[1] = variant_.stem_channels();
    log.emplace_back(name_ + ".stem", h);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const auto& spec = blocks_[i].spec();
      stride_down("stage " + std::to_string(stage_of_[i] + 1) + " (" + blocks_[i].name() + ")", spec.stride);
      h[1] = spec.out_channels;
      log.emplace_back(blocks_[i].name(), h);
    }
    h[1] = variant_.head_channels();
    log.emplace_back(name_ + ".head", h);
    log.emplace_back(name_ + ".gap", Shape{h[0], h[1]});
    return log;
  }

 private:
  std::string block_name(std::size_t stage, std::size_t repeat) const {
    return name_ + ".stage" + std::to_string(stage + 1) + ".block" + std::to_string(repeat);
  }

  std::string name_;
  int rank_ = 2;
  ScaledVariant variant_;
  std::size_t in_channels_ = 1;
  Conv<T> stem_conv_;
  BatchNorm<T> stem_bn_;
  std::vector<MBConv<T>> blocks_;
  std::vector<std::size_t> stage_of_;
  Conv<T> head_conv_;
  BatchNorm<T> head_bn_;
};

/// Backbone followed by a single-logit dense classifier.
template <typename T>
class EfficientNetModel : public Model<T> {
 public:
  EfficientNetModel(int rank, ScaledVariant variant, std::size_t in_channels, std::vector<std::size_t> in_spatial,
                    std::uint64_t seed) {
    Rng rng(seed);
    this->contract_ = InputContract{rank, in_channels, std::move(in_spatial)};
    if (this->contract_.spatial.size() != static_cast<std::size_t>(rank)) {
      throw ShapeError("input spatial extents must have " + std::to_string(rank) + " entries");
    }
    backbone_ = EfficientNetBackbone<T>(this->params_, "backbone", rank, std::move(variant), in_channels, rng);
    classifier_ = Dense<T>(this->params_, "classifier", backbone_.feature_length(), 1, rng);
    trace(this->contract_.batch_shape(1));
  }

  Tensor<T> forward(const Tensor<T>& x, const Context<T>& ctx) override {
    trace(x.shape());
    auto y = classifier_.forward(backbone_.features(x, ctx), ctx);
    ctx.log("classifier", y.shape());
    return y;
  }

  ShapeLog trace(const Shape& input) const override {
    auto log = backbone_.trace(input);
    log.emplace_back("classifier", Shape{input[0], 1});
    return log;
  }

  std::string describe() const override {
    return "EfficientNet-" + std::to_string(this->contract_.rank) + "D " + backbone_.variant().name;
  }

  EfficientNetBackbone<T>& backbone() { return backbone_; }
  Dense<T>& classifier() { return classifier_; }

 private:
  EfficientNetBackbone<T> backbone_;
  Dense<T> classifier_;
};

/// Rank-2 backbone and the multiscale branch read the same input; their
/// pooled features are concatenated (backbone first) before the classifier.
template <typename T>
class MultiscaleEfficientNetModel : public Model<T> {
 public:
  MultiscaleEfficientNetModel(ScaledVariant variant, std::size_t in_channels, std::vector<std::size_t> in_spatial,
                              std::uint64_t seed, MultiscaleSpec ms = {}) {
    Rng rng(seed);
    this->contract_ = InputContract{2, in_channels, std::move(in_spatial)};
    if (this->contract_.spatial.size() != 2) throw ShapeError("multiscale model expects two spatial extents");
    backbone_ = EfficientNetBackbone<T>(this->params_, "backbone", 2, std::move(variant), in_channels, rng);
    multiscale_ = MultiscaleBlock<T>(this->params_, "multiscale", in_channels, ms, rng);
    classifier_ = Dense<T>(this->params_, "classifier", fused_length(), 1, rng);
    trace(this->contract_.batch_shape(1));
  }

  std::size_t fused_length() const { return backbone_.feature_length() + multiscale_.feature_length(); }

  Tensor<T> forward(const Tensor<T>& x, const Context<T>& ctx) override {
    trace(x.shape());
    auto hi = backbone_.features(x, ctx);
    auto lo = multiscale_.forward(x, ctx);
    auto fused = ops::concat_features(hi, lo, ctx.tape);
    ctx.log("fused", fused.shape());
    auto y = classifier_.forward(fused, ctx);
    ctx.log("classifier", y.shape());
    return y;
  }

  ShapeLog trace(const Shape& input) const override {
    auto log = backbone_.trace(input);
    multiscale_.check_input(input);
    std::size_t h = input[2], w = input[3];
    const std::size_t pw = multiscale_.spec().pool_window;
    h = (h - pw) / pw + 1;
    w = (w - pw) / pw + 1;
    log.emplace_back("multiscale.stage1", Shape{input[0], multiscale_.spec().conv_channels[0], h, w});
    h = (h - pw) / pw + 1;
    w = (w - pw) / pw + 1;
    log.emplace_back("multiscale.stage2", Shape{input[0], multiscale_.spec().conv_channels[1], h, w});
    log.emplace_back("fused", Shape{input[0], fused_length()});
    log.emplace_back("classifier", Shape{input[0], 1});
    return log;
  }

  std::string describe() const override { return "Multiscale-EfficientNet " + backbone_.variant().name; }

  EfficientNetBackbone<T>& backbone() { return backbone_; }
  MultiscaleBlock<T>& multiscale() { return multiscale_; }
  Dense<T>& classifier() { return classifier_; }

 private:
  EfficientNetBackbone<T> backbone_;
  MultiscaleBlock<T> multiscale_;
  Dense<T> classifier_;
};

template <typename T>
std::unique_ptr<Model<T>> build_efficientnet(int rank, const ScaledVariant& variant, std::size_t in_channels,
                                             std::vector<std::size_t> in_spatial, std::uint64_t seed = 0) {
  return std::make_unique<EfficientNetModel<T>>(rank, variant, in_channels, std::move(in_spatial), seed);
}

template <typename T>
std::unique_ptr<Model<T>> build_multiscale_efficientnet(const ScaledVariant& variant, std::vector<std::size_t> in_spatial,
                                                        std::uint64_t seed = 0, std::size_t in_channels = 3,
                                                        MultiscaleSpec ms = {}) {
  return std::make_unique<MultiscaleEfficientNetModel<T>>(variant, in_channels, std::move(in_spatial), seed, ms);
}

}  // namespace lesionnet
