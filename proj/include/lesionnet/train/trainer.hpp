#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "lesionnet/data/augment.hpp"
#include "lesionnet/data/csv.hpp"
#include "lesionnet/data/dataset.hpp"
#include "lesionnet/metrics/auc.hpp"
#include "lesionnet/models/efficientnet.hpp"
#include "lesionnet/train/early_stopping.hpp"
#include "lesionnet/train/loss.hpp"
#include "lesionnet/train/optimizer.hpp"

namespace lesionnet {

struct TrainConfig {
  OptimizerConfig optimizer;
  std::size_t epochs = 100;
  std::size_t batch_size = 4;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  bool augment = true;
  AugmentConfig augmentation;
  bool shuffle = true;
};

struct EpochRecord {
  std::size_t epoch;
  double train_loss;
  double val_auc;
};

struct History {
  std::vector<EpochRecord> epochs;
  double best_val_auc = 0.0;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

/// Contiguous chunks of `batch_size`; a trailing single sample joins the
/// previous chunk so batch-norm always sees at least two samples.
inline std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order, std::size_t batch_size) {
  if (batch_size == 0) throw Error("batch size must be positive");
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  }
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

/// Stacks samples into [B, C, spatial...]; augments each one from its own
/// (seed, sample, epoch) stream when requested.
template <typename T>
Tensor<T> make_batch(const std::vector<Sample<T>>& samples, const std::vector<std::size_t>& idx, bool augment,
                     const AugmentConfig& aug, std::uint64_t seed, std::size_t epoch) {
  const Shape& s0 = samples.at(idx.front()).input.shape();
  Shape shape{idx.size()};
  shape.insert(shape.end(), s0.begin(), s0.end());
  Array<T> batch(shape);
  const std::size_t per = shape_size(s0);
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& s = samples[idx[b]];
    if (s.input.shape() != s0) throw ShapeError("samples in a batch differ in shape");
    auto dst = batch.data().begin() + static_cast<std::ptrdiff_t>(b * per);
    if (augment) {
      Rng rng(stream_seed(seed, s.case_id + "#" + std::to_string(idx[b]), epoch));
      const auto a = apply_augment(s.input.template cast<float>(), sample_augment(rng, aug));
      std::transform(a.data().begin(), a.data().end(), dst, [](float v) { return static_cast<T>(v); });
    } else {
      std::copy(s.input.data().begin(), s.input.data().end(), dst);
    }
  }
  return Tensor<T>(std::move(batch));
}

/// Inference-mode probabilities averaged over each case's samples.
template <typename T>
std::vector<CaseScore> predict_cases(Model<T>& model, const std::vector<Sample<T>>& samples, std::size_t batch_size = 8) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::map<std::string, std::pair<double, std::size_t>> acc;
  std::map<std::string, int> label;
  std::vector<std::string> case_order;
  Context<T> ctx;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(i),
                                       order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
    const auto logits = model.forward(make_batch(samples, idx, false, {}, 0, 0), ctx);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const auto& s = samples[idx[b]];
      const double p = stable_sigmoid(static_cast<double>(logits.value()[b]));
      if (!std::isfinite(p)) throw NumericalError("non-finite prediction for case '" + s.case_id + "'");
      if (!acc.count(s.case_id)) case_order.push_back(s.case_id);
      acc[s.case_id].first += p;
      acc[s.case_id].second += 1;
      label[s.case_id] = s.label;
    }
  }
  std::vector<CaseScore> out;
  for (const auto& id : case_order) {
    out.push_back({id, acc[id].first / static_cast<double>(acc[id].second), label[id]});
  }
  return out;
}

inline double case_auc(const std::vector<CaseScore>& scores, TieMode ties = TieMode::half) {
  ScoredDataset d;
  for (const auto& s : scores) {
    if (s.label == 0) d.neg.push_back(s.score);
    else if (s.label == 1) d.pos.push_back(s.score);
    else throw DataError("case '" + s.case_id + "' has no label");
  }
  return auc_wmw(d, ties);
}

template <typename T>
double evaluate_auc(Model<T>& model, const std::vector<Sample<T>>& samples) {
  return case_auc(predict_cases(model, samples));
}

/// Mini-batch training with per-epoch validation AUC and early stopping.
///
/// On return the model holds the weights of the best validation epoch.
template <typename T>
History train(Model<T>& model, const std::vector<Sample<T>>& train_set, const std::vector<Sample<T>>& val_set,
              const TrainConfig& cfg, const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  if (train_set.empty()) throw DataError("training split is empty");
  if (val_set.empty()) throw DataError("validation split is empty");
  for (const auto* set : {&train_set, &val_set})
    for (const auto& s : *set)
      if (s.label != 0 && s.label != 1) throw DataError("case '" + s.case_id + "' has no binary label");

  Optimizer<T> opt(cfg.optimizer);
  EarlyStopping<T> stopper(cfg.patience);
  History history;
  auto& params = model.parameters();
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) {
      Rng rng(stream_seed(cfg.seed, "shuffle", epoch));
      for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[static_cast<std::size_t>(rng() % (i + 1))]);
    }
    double loss_sum = 0.0;
    for (const auto& idx : make_batches(order, cfg.batch_size)) {
      Tape<T> tape;
      Context<T> ctx{&tape, Mode::train, nullptr};
      const auto x = make_batch(train_set, idx, cfg.augment, cfg.augmentation, cfg.seed, epoch);
      std::vector<int> labels;
      for (auto i : idx) labels.push_back(train_set[i].label);
      auto loss = ops::bce_with_logits(model.forward(x, ctx), labels, &tape);
      const double lv = static_cast<double>(loss.item());
      if (!std::isfinite(lv)) throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch));
      tape.backward(loss);
      opt.step(params);
      loss_sum += lv * static_cast<double>(idx.size());
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(train_set.size()), evaluate_auc(model, val_set)};
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (stopper.update(rec.val_auc, params) == StopDecision::stop) {
      history.stopped_early = true;
      break;
    }
  }
  stopper.restore_best(params);
  history.best_val_auc = stopper.best_value();
  history.best_epoch = stopper.best_epoch();
  return history;
}

}  // namespace lesionnet
