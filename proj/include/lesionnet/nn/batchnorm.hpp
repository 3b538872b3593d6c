#pragma once

#include <cmath>
#include <string>

#include "lesionnet/core/module.hpp"
#include "lesionnet/core/ops.hpp"

namespace lesionnet {

namespace ops {

/// Per-channel batch statistics of [N, C, spatial...].
template <typename T>
struct BatchMoments {
  std::vector<T> mean;
  std::vector<T> var;  // biased
};

/// Training-mode normalisation with batch statistics.
template <typename T>
Tensor<T> batch_norm_train(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps,
                           BatchMoments<T>* moments = nullptr, Tape<T>* tape = nullptr) {
  if (x.rank() < 2) throw ShapeError("batch_norm expects [N, C, ...], got " + shape_str(x.shape()));
  const std::size_t n = x.dim(0), c = x.dim(1), sp = detail::spatial_size(x.shape());
  const std::size_t m = n * sp;
  if (m < 2) {
    throw ShapeError("batch_norm in train mode needs at least 2 values per channel, got " + std::to_string(m) +
                     " for input " + shape_str(x.shape()));
  }
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) throw ShapeError("batch_norm gamma/beta must be [C]");
  const auto& xv = x.value();
  std::vector<T> mean(c, T{0}), var(c, T{0}), inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    T acc{0};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < sp; ++j) acc += xv[(i * c + ch) * sp + j];
    mean[ch] = acc / static_cast<T>(m);
    T sq{0};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < sp; ++j) {
        const T d = xv[(i * c + ch) * sp + j] - mean[ch];
        sq += d * d;
      }
    var[ch] = sq / static_cast<T>(m);
    inv_std[ch] = T{1} / std::sqrt(var[ch] + eps);
  }
  Array<T> xhat(x.shape());
  Array<T> y(x.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t j = 0; j < sp; ++j) {
        const std::size_t k = (i * c + ch) * sp + j;
        xhat[k] = (xv[k] - mean[ch]) * inv_std[ch];
        y[k] = gamma.value()[ch] * xhat[k] + beta.value()[ch];
      }
  if (moments) *moments = BatchMoments<T>{mean, var};
  Tensor<T> out(std::move(y));
  if (tape && Tape<T>::needs_grad({&x, &gamma, &beta})) {
    tape->record("batch_norm_train", {x, gamma, beta}, out,
                 [x, gamma, beta, out, xhat = std::move(xhat), inv_std = std::move(inv_std), n, c, sp, m]() mutable {
                   const auto& g = out.grad();
                   for (std::size_t ch = 0; ch < c; ++ch) {
                     T sum_g{0}, sum_gx{0};
                     for (std::size_t i = 0; i < n; ++i)
                       for (std::size_t j = 0; j < sp; ++j) {
                         const std::size_t k = (i * c + ch) * sp + j;
                         sum_g += g[k];
                         sum_gx += g[k] * xhat[k];
                       }
                     if (gamma.requires_grad()) gamma.mutable_grad()[ch] += sum_gx;
                     if (beta.requires_grad()) beta.mutable_grad()[ch] += sum_g;
                     if (x.requires_grad()) {
                       auto& gx = x.mutable_grad();
                       const T scale = gamma.value()[ch] * inv_std[ch] / static_cast<T>(m);
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < sp; ++j) {
                           const std::size_t k = (i * c + ch) * sp + j;
                           gx[k] += scale * (static_cast<T>(m) * g[k] - sum_g - xhat[k] * sum_gx);
                         }
                     }
                   }
                 });
  }
  return out;
}

/// Inference-mode normalisation with fixed statistics.
template <typename T>
Tensor<T> batch_norm_infer(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, const Array<T>& mean,
                           const Array<T>& var, T eps, Tape<T>* tape = nullptr) {
  if (x.rank() < 2) throw ShapeError("batch_norm expects [N, C, ...], got " + shape_str(x.shape()));
  const std::size_t n = x.dim(0), c = x.dim(1), sp = detail::spatial_size(x.shape());
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) throw ShapeError("batch_norm gamma/beta must be [C]");
  std::vector<T> inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) inv_std[ch] = T{1} / std::sqrt(var[ch] + eps);
  Array<T> y(x.shape());
  const auto& xv = x.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t j = 0; j < sp; ++j) {
        const std::size_t k = (i * c + ch) * sp + j;
        y[k] = gamma.value()[ch] * ((xv[k] - mean[ch]) * inv_std[ch]) + beta.value()[ch];
      }
  Tensor<T> out(std::move(y));
  if (tape && Tape<T>::needs_grad({&x, &gamma, &beta})) {
    tape->record("batch_norm_infer", {x, gamma, beta}, out,
                 [x, gamma, beta, out, mean, inv_std = std::move(inv_std), n, c, sp]() mutable {
                   const auto& g = out.grad();
                   const auto& xv = x.value();
                   for (std::size_t ch = 0; ch < c; ++ch) {
                     T sum_g{0}, sum_gx{0};
                     for (std::size_t i = 0; i < n; ++i)
                       for (std::size_t j = 0; j < sp; ++j) {
                         const std::size_t k = (i * c + ch) * sp + j;
                         sum_g += g[k];
                         sum_gx += g[k] * (xv[k] - mean[ch]) * inv_std[ch];
                         if (x.requires_grad()) x.mutable_grad()[k] += g[k] * gamma.value()[ch] * inv_std[ch];
                       }
                     if (gamma.requires_grad()) gamma.mutable_grad()[ch] += sum_gx;
                     if (beta.requires_grad()) beta.mutable_grad()[ch] += sum_g;
                   }
                 });
  }
  return out;
}

}  // namespace ops

/// Learnable gamma/beta with exponential-moving-average running statistics.
///
/// running <- momentum * running + (1 - momentum) * batch, using the biased
/// batch variance.
template <typename T>
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(ParameterSet<T>& ps, const std::string& name, std::size_t channels, T momentum = T(0.99),
            T eps = T(1e-3))
      : momentum_(momentum), eps_(eps) {
    if (!(momentum > T{0} && momentum < T{1})) throw Error("batch_norm momentum must be in (0, 1)");
    if (!(eps > T{0})) throw Error("batch_norm eps must be positive");
    gamma_ = ps.add_parameter(name + ".gamma", Array<T>(Shape{channels}, T{1}));
    beta_ = ps.add_parameter(name + ".beta", Array<T>(Shape{channels}, T{0}));
    running_mean_ = ps.add_buffer(name + ".running_mean", Array<T>(Shape{channels}, T{0}));
    running_var_ = ps.add_buffer(name + ".running_var", Array<T>(Shape{channels}, T{1}));
  }

  Tensor<T> forward(const Tensor<T>& x, const Context<T>& ctx) {
    if (ctx.mode == Mode::infer) {
      return ops::batch_norm_infer(x, gamma_, beta_, running_mean_.value(), running_var_.value(), eps_, ctx.tape);
    }
    ops::BatchMoments<T> moments;
    auto y = ops::batch_norm_train(x, gamma_, beta_, eps_, &moments, ctx.tape);
    auto& rm = running_mean_.mutable_value();
    auto& rv = running_var_.mutable_value();
    for (std::size_t ch = 0; ch < rm.size(); ++ch) {
      rm[ch] = momentum_ * rm[ch] + (T{1} - momentum_) * moments.mean[ch];
      rv[ch] = momentum_ * rv[ch] + (T{1} - momentum_) * moments.var[ch];
    }
    return y;
  }

  Tensor<T>& gamma() { return gamma_; }
  Tensor<T>& beta() { return beta_; }
  Tensor<T>& running_mean() { return running_mean_; }
  Tensor<T>& running_var() { return running_var_; }
  T momentum() const { return momentum_; }
  T eps() const { return eps_; }

 private:
  T momentum_{0.99};
  T eps_{1e-3};
  Tensor<T> gamma_, beta_, running_mean_, running_var_;
};

}  // namespace lesionnet
