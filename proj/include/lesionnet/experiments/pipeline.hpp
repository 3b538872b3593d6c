#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lesionnet/data/csv.hpp"
#include "lesionnet/data/dataset.hpp"
#include "lesionnet/data/ensemble.hpp"
#include "lesionnet/data/split.hpp"
#include "lesionnet/models/efficientnet.hpp"
#include "lesionnet/models/weights_io.hpp"
#include "lesionnet/train/trainer.hpp"

namespace lesionnet {

enum class ModelKind { eff3d, eff2d, multiscale };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::eff3d: return "eff3d";
    case ModelKind::eff2d: return "eff2d";
    case ModelKind::multiscale: return "multiscale";
  }
  return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "eff3d") return ModelKind::eff3d;
  if (s == "eff2d") return ModelKind::eff2d;
  if (s == "multiscale") return ModelKind::multiscale;
  throw Error("unknown model '" + s + "' (expected eff3d, eff2d or multiscale)");
}

/// "b0", "b7" or "custom:<width>,<depth>".
inline ScaledVariant parse_variant(const std::string& s) {
  if (s == "b0" || s == "B0") return ScaledVariant::b0();
  if (s == "b7" || s == "B7") return ScaledVariant::b7();
  const std::string prefix = "custom:";
  if (s.rfind(prefix, 0) == 0) {
    const auto body = s.substr(prefix.size());
    const auto comma = body.find(',');
    if (comma == std::string::npos) throw Error("custom variant must be custom:<width>,<depth>");
    try {
      return ScaledVariant::custom(std::stod(body.substr(0, comma)), std::stod(body.substr(comma + 1)));
    } catch (const std::invalid_argument&) {
      throw Error("custom variant multipliers must be numbers: '" + s + "'");
    }
  }
  throw Error("unknown variant '" + s + "' (expected b0, b7 or custom:<width>,<depth>)");
}

/// Everything needed to rebuild a model and reproduce a run.
struct RunConfig {
  ModelKind model = ModelKind::eff3d;
  std::string variant = "b0";
  InputSpec input;
  std::size_t depth = 4;  // volume depth for the `volume` layout
  TrainConfig train;
  std::string ensemble_ratio = "3:3:3:2";

  RunConfig() { train.optimizer.lr = 1e-4; }

  /// Input layout a model kind uses unless overridden.
  static InputLayout default_layout(ModelKind k) {
    return k == ModelKind::eff3d ? InputLayout::modality_stack : InputLayout::slices;
  }

  InputContract contract() const {
    switch (input.layout) {
      case InputLayout::modality_stack: return {3, 1, {kModalities.size(), input.size, input.size}};
      case InputLayout::volume: return {3, 1, {depth, input.size, input.size}};
      case InputLayout::slices: return {2, input.window, {input.size, input.size}};
    }
    return {};
  }

  void validate() const {
    const auto c = contract();
    if (model == ModelKind::eff3d && c.rank != 3) throw Error("eff3d needs a 3-D input layout (stack or volume)");
    if (model != ModelKind::eff3d && c.rank != 2) throw Error(to_string(model) + " needs the slices input layout");
    if (model == ModelKind::multiscale && c.channels != 3) throw Error("multiscale model expects a slice window of 3");
    if (input.size < 2) throw Error("input size must be >= 2");
    if (train.batch_size == 0) throw Error("batch size must be positive");
    if (train.epochs == 0) throw Error("epochs must be positive");
    parse_variant(variant);
    EnsembleWeights::parse(ensemble_ratio);
  }

  std::map<std::string, std::string> to_map() const {
    std::ostringstream lr;
    lr << std::setprecision(17) << train.optimizer.lr;
    return {
        {"model", to_string(model)},
        {"variant", variant},
        {"input", to_string(input.layout)},
        {"modality", to_string(input.modality)},
        {"size", std::to_string(input.size)},
        {"window", std::to_string(input.window)},
        {"depth", std::to_string(depth)},
        {"optimizer", to_string(train.optimizer.kind)},
        {"lr", lr.str()},
        {"adam_bias_correction", train.optimizer.adam_bias_correction ? "true" : "false"},
        {"epochs", std::to_string(train.epochs)},
        {"batch_size", std::to_string(train.batch_size)},
        {"patience", std::to_string(train.patience)},
        {"seed", std::to_string(train.seed)},
        {"augment", train.augment ? "true" : "false"},
        {"ensemble_ratio", ensemble_ratio},
    };
  }

  static RunConfig from_map(const std::map<std::string, std::string>& kv) {
    RunConfig c;
    auto get = [&](const char* k) -> std::optional<std::string> {
      const auto it = kv.find(k);
      if (it == kv.end()) return std::nullopt;
      return it->second;
    };
    auto num = [&](const char* k, auto& out) {
      if (auto v = get(k)) {
        try {
          if constexpr (std::is_floating_point_v<std::decay_t<decltype(out)>>) {
            out = std::stod(*v);
          } else {
            out = static_cast<std::decay_t<decltype(out)>>(std::stoull(*v));
          }
        } catch (const std::exception&) {
          throw Error(std::string("config key '") + k + "' has non-numeric value '" + *v + "'");
        }
      }
    };
    auto flag = [&](const char* k, bool& out) {
      if (auto v = get(k)) out = (*v == "true" || *v == "1");
    };
    if (auto v = get("model")) {
      c.model = parse_model_kind(*v);
      c.input.layout = default_layout(c.model);
    }
    if (auto v = get("variant")) c.variant = *v;
    if (auto v = get("input")) c.input.layout = parse_layout(*v);
    if (auto v = get("modality")) c.input.modality = parse_modality(*v);
    num("size", c.input.size);
    num("window", c.input.window);
    num("depth", c.depth);
    if (auto v = get("optimizer")) c.train.optimizer.kind = parse_optimizer(*v);
    num("lr", c.train.optimizer.lr);
    flag("adam_bias_correction", c.train.optimizer.adam_bias_correction);
    num("epochs", c.train.epochs);
    num("batch_size", c.train.batch_size);
    num("patience", c.train.patience);
    num("seed", c.train.seed);
    flag("augment", c.train.augment);
    if (auto v = get("ensemble_ratio")) c.ensemble_ratio = *v;
    return c;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write run config '" + path.string() + "'");
    for (const auto& [k, v] : to_map()) out << k << '=' << v << '\n';
  }

  static RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open run config '" + path.string() + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
      line = detail::trim(line);
      if (line.empty() || line[0] == '#' || line[0] == '[') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw FormatError("run config line without '=': " + line);
      kv[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
    }
    return from_map(kv);
  }

  std::string summary() const {
    std::ostringstream os;
    os << "model=" << to_string(model) << " variant=" << variant << " input=" << to_string(input.layout)
       << " optimizer=" << to_string(train.optimizer.kind) << " lr=" << train.optimizer.lr
       << " batch_size=" << train.batch_size << " epochs=" << train.epochs << " patience=" << train.patience
       << " seed=" << train.seed;
    return os.str();
  }
};

template <typename T = float>
std::unique_ptr<Model<T>> build_model(const RunConfig& cfg) {
  cfg.validate();
  const auto c = cfg.contract();
  const auto variant = parse_variant(cfg.variant);
  const std::uint64_t seed = mix_seed(cfg.train.seed ^ 0x1417ULL);
  switch (cfg.model) {
    case ModelKind::eff3d:
    case ModelKind::eff2d: return build_efficientnet<T>(c.rank, variant, c.channels, c.spatial, seed);
    case ModelKind::multiscale: return build_multiscale_efficientnet<T>(variant, c.spatial, seed, c.channels);
  }
  return nullptr;
}

struct LabeledDataset {
  std::filesystem::path root;
  std::map<std::string, int> labels;
  std::vector<std::string> ids;  // labeled cases present on disk
};

/// Reads <root>/labels.csv and keeps labeled cases that have a directory.
inline LabeledDataset open_dataset(const std::filesystem::path& root) {
  const auto labels_path = root / "labels.csv";
  if (!std::filesystem::exists(labels_path)) throw DataError("missing labels file '" + labels_path.string() + "'");
  LabeledDataset d{root, load_labels(labels_path.string()), {}};
  for (const auto& id : list_cases(root))
    if (d.labels.count(id)) d.ids.push_back(id);
  if (d.ids.empty()) throw DataError("no labeled cases found under '" + root.string() + "'");
  return d;
}

struct TrainOutcome {
  History history;
  double final_val_auc = 0.0;
  std::vector<CaseScore> val_scores;
  std::filesystem::path checkpoint;
  std::filesystem::path history_file;
};

inline void write_history(const History& h, const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write history '" + path.string() + "'");
  out << "# " << cfg.summary() << '\n';
  out << "epoch,train_loss,val_auc\n";
  out << std::setprecision(9);
  for (const auto& r : h.epochs) out << r.epoch << ',' << r.train_loss << ',' << r.val_auc << '\n';
}

/// Split, train, and write best.lnwt, history.csv, run.cfg and
/// val_scores.csv into `out_dir`.
inline TrainOutcome run_training(const RunConfig& cfg, const std::filesystem::path& data_dir,
                                 const std::filesystem::path& out_dir,
                                 const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  const auto data = open_dataset(data_dir);
  const auto sp = split(data.ids, cfg.train.seed);
  const auto train_set = load_samples(data_dir, sp.train_ids, data.labels, cfg.input);
  const auto val_set = load_samples(data_dir, sp.val_ids, data.labels, cfg.input);
  auto model = build_model<float>(cfg);
  TrainOutcome out;
  out.history = train(*model, train_set, val_set, cfg.train, on_epoch);
  out.val_scores = predict_cases(*model, val_set);
  out.final_val_auc = case_auc(out.val_scores);
  std::filesystem::create_directories(out_dir);
  out.checkpoint = out_dir / "best.lnwt";
  out.history_file = out_dir / "history.csv";
  save_weights(model->parameters(), out.checkpoint.string());
  write_history(out.history, cfg, out.history_file);
  cfg.save(out_dir / "run.cfg");
  save_scores(out.val_scores, (out_dir / "val_scores.csv").string());
  return out;
}

/// Config stored next to a checkpoint, i.e. <dir of checkpoint>/run.cfg.
inline RunConfig config_for_checkpoint(const std::filesystem::path& checkpoint) {
  const auto cfg_path = checkpoint.parent_path() / "run.cfg";
  if (!std::filesystem::exists(cfg_path)) throw DataError("no run.cfg next to checkpoint '" + checkpoint.string() + "'");
  return RunConfig::load(cfg_path);
}

inline std::unique_ptr<Model<float>> load_model(const RunConfig& cfg, const std::filesystem::path& checkpoint) {
  auto model = build_model<float>(cfg);
  load_weights(model->parameters(), checkpoint.string());
  return model;
}

enum class EvalSplit { val, all };

struct EvalOutcome {
  double auc = 0.0;
  std::vector<CaseScore> scores;
};

/// Scores the validation split (same seed as training) or every labeled case.
inline EvalOutcome run_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                            const std::filesystem::path& data_dir, EvalSplit which) {
  auto model = load_model(cfg, checkpoint);
  const auto data = open_dataset(data_dir);
  const auto ids = which == EvalSplit::all ? data.ids : split(data.ids, cfg.train.seed).val_ids;
  const auto samples = load_samples(data_dir, ids, data.labels, cfg.input);
  EvalOutcome out;
  out.scores = predict_cases(*model, samples);
  out.auc = case_auc(out.scores);
  return out;
}

struct EnsemblePrediction {
  std::string case_id;
  double probability;
};

/// Per-case weighted mean of four per-modality model probabilities.
/// A modality with weight 0 may be left without a checkpoint.
inline std::vector<EnsemblePrediction> predict_ensemble(
    const std::array<std::optional<std::filesystem::path>, 4>& checkpoints, const std::filesystem::path& case_dir,
    const EnsembleWeights& weights) {
  const auto ids = list_cases(case_dir);
  if (ids.empty()) throw DataError("no case directories under '" + case_dir.string() + "'");
  std::map<std::string, std::array<double, 4>> probs;
  for (const auto& id : ids) probs[id] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t m = 0; m < 4; ++m) {
    if (!checkpoints[m]) {
      if (weights[m] != 0.0) {
        throw DataError("missing checkpoint for modality " + to_string(kModalities[m]) + " with nonzero weight");
      }
      continue;
    }
    const auto cfg = config_for_checkpoint(*checkpoints[m]);
    auto model = load_model(cfg, *checkpoints[m]);
    const auto samples = load_samples(case_dir, ids, {}, cfg.input);
    for (const auto& s : predict_cases(*model, samples)) probs[s.case_id][m] = s.score;
  }
  std::vector<EnsemblePrediction> out;
  for (const auto& id : ids) out.push_back({id, ensemble_predict(probs[id], weights)});
  return out;
}

struct ComparisonRow {
  std::string name;
  double best_val_auc;
  double train_auc;
  std::size_t best_epoch;
  std::size_t epochs_run;
};

/// Trains `base` once per configuration on the same split and reports the
/// best validation AUC of each run.
inline std::vector<ComparisonRow> compare_runs(const std::vector<std::pair<std::string, RunConfig>>& runs,
                                               const std::filesystem::path& data_dir,
                                               const std::function<void(const std::string&, const EpochRecord&)>& on_epoch = {}) {
  const auto data = open_dataset(data_dir);
  std::vector<ComparisonRow> rows;
  for (const auto& [name, cfg] : runs) {
    cfg.validate();
    const auto sp = split(data.ids, cfg.train.seed);
    const auto train_set = load_samples(data_dir, sp.train_ids, data.labels, cfg.input);
    const auto val_set = load_samples(data_dir, sp.val_ids, data.labels, cfg.input);
    auto model = build_model<float>(cfg);
    const auto h = train(*model, train_set, val_set, cfg.train, [&, n = name](const EpochRecord& r) {
      if (on_epoch) on_epoch(n, r);
    });
    rows.push_back({name, h.best_val_auc, evaluate_auc(*model, train_set), h.best_epoch, h.epochs.size()});
  }
  return rows;
}

/// Learning rate Adadelta gets in a sweep. Its update is already scaled by
/// the ratio of running RMS values, so the base rate meant for the other
/// optimizers leaves it nearly frozen.
inline constexpr double kSweepAdadeltaLr = 1.0;

/// Same data and model, one run per optimizer. Adadelta uses `adadelta_lr`,
/// every other optimizer the learning rate in `base`.
inline std::vector<ComparisonRow> sweep_optimizers(const RunConfig& base, const std::filesystem::path& data_dir,
                                                   const std::vector<OptimizerKind>& kinds,
                                                   const std::function<void(const std::string&, const EpochRecord&)>& on_epoch = {},
                                                   double adadelta_lr = kSweepAdadeltaLr) {
  std::vector<std::pair<std::string, RunConfig>> runs;
  for (auto k : kinds) {
    RunConfig c = base;
    c.train.optimizer.kind = k;
    if (k == OptimizerKind::adadelta) c.train.optimizer.lr = adadelta_lr;
    runs.emplace_back(to_string(k), c);
  }
  return compare_runs(runs, data_dir, on_epoch);
}

/// EfficientNet-3D against Multiscale-EfficientNet on the same split.
inline std::vector<ComparisonRow> benchmark_models(const RunConfig& eff3d, const RunConfig& multiscale,
                                                   const std::filesystem::path& data_dir,
                                                   const std::function<void(const std::string&, const EpochRecord&)>& on_epoch = {}) {
  return compare_runs({{"EfficientNet 3D " + eff3d.variant, eff3d}, {"Multiscale EfficientNet " + multiscale.variant, multiscale}},
                      data_dir, on_epoch);
}

inline std::string format_table(const std::string& first_column, const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << first_column << ",best_val_auc,train_auc,best_epoch,epochs_run\n" << std::fixed << std::setprecision(5);
  for (const auto& r : rows) {
    os << r.name << ',' << r.best_val_auc << ',' << r.train_auc << ',' << r.best_epoch << ',' << r.epochs_run << '\n';
  }
  return os.str();
}

}  // namespace lesionnet
