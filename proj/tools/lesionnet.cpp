// lesionnet command-line tool: synth, train, eval, predict, sweep, bench.
//
// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical failure.

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "lesionnet/experiments/pipeline.hpp"

using namespace lesionnet;
namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

// Raw option values; strings are parsed after CLI11 is done so that bad
// values surface as our own errors with a clear message.
struct TrainFlags {
  std::string model = "eff3d";
  std::string variant = "b0";
  std::string input;  // empty: model default
  std::string modality = "T1w";
  std::size_t size = 256;
  std::size_t depth = 4;
  std::string optimizer = "adam";
  double lr = 1e-4;
  std::size_t epochs = 100;
  std::size_t batch_size = 4;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  bool no_augment = false;
  bool adam_bias_correction = false;
  std::string ratio = "3:3:3:2";

  RunConfig to_config() const {
    std::map<std::string, std::string> kv{
        {"model", model},
        {"variant", variant},
        {"modality", modality},
        {"size", std::to_string(size)},
        {"depth", std::to_string(depth)},
        {"optimizer", optimizer},
        {"epochs", std::to_string(epochs)},
        {"batch_size", std::to_string(batch_size)},
        {"patience", std::to_string(patience)},
        {"seed", std::to_string(seed)},
        {"augment", no_augment ? "false" : "true"},
        {"adam_bias_correction", adam_bias_correction ? "true" : "false"},
        {"ensemble_ratio", ratio},
    };
    if (!input.empty()) kv["input"] = input;
    auto cfg = RunConfig::from_map(kv);
    cfg.train.optimizer.lr = lr;
    cfg.validate();
    return cfg;
  }
};

void add_train_flags(CLI::App* app, TrainFlags& f) {
  app->add_option("--model", f.model, "eff3d, eff2d or multiscale")->capture_default_str();
  app->add_option("--variant", f.variant, "b0, b7 or custom:<width>,<depth>")->capture_default_str();
  app->add_option("--input", f.input, "stack, volume or slices (default depends on model)");
  app->add_option("--modality", f.modality, "FLAIR, T1w, T1Gd or T2 for volume/slices inputs")->capture_default_str();
  app->add_option("--size", f.size, "in-plane resize target")->capture_default_str();
  app->add_option("--depth", f.depth, "volume depth for the volume input")->capture_default_str();
  app->add_option("--optimizer", f.optimizer, "adam, sgd, rmsprop or adadelta")->capture_default_str();
  app->add_option("--lr", f.lr, "learning rate")->capture_default_str();
  app->add_option("--epochs", f.epochs)->capture_default_str();
  app->add_option("--batch-size", f.batch_size)->capture_default_str();
  app->add_option("--patience", f.patience, "early stopping patience in epochs")->capture_default_str();
  app->add_option("--seed", f.seed)->envname("LESIONNET_SEED")->capture_default_str();
  app->add_flag("--no-augment", f.no_augment, "disable flips and rotation");
  app->add_flag("--adam-bias-correction", f.adam_bias_correction, "textbook Adam with bias-corrected moments");
  app->add_option("--ratio", f.ratio, "ensemble ratio FLAIR:T1w:T1Gd:T2")->capture_default_str();
  app->add_option("--config", "key=value file; command-line flags win");
}

void print_epoch(const EpochRecord& r) {
  std::cout << "epoch " << r.epoch << " loss " << std::setprecision(6) << r.train_loss << " val_auc " << std::fixed
            << std::setprecision(5) << r.val_auc << std::defaultfloat << '\n'
            << std::flush;
}

std::string format_auc(double auc) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(5) << auc;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out << text;
}

// CLI11 only honours config files on the top-level app, so a subcommand's
// --config file is expanded into flags placed ahead of the user's own. With
// TakeLast the later, explicit flag wins.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty() || args.empty()) return args;
  std::ifstream in(path);
  if (!in) throw Error("cannot read config file '" + path + "'");
  std::vector<std::string> flags;
  std::string line;
  while (std::getline(in, line)) {
    line = detail::trim(line);
    if (line.empty() || line[0] == '#' || line[0] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config line without '=': " + line);
    std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "seed" && std::getenv("LESIONNET_SEED")) continue;  // the environment overrides the file
    if (key == "augment") {
      if (value == "false" || value == "0") flags.push_back("--no-augment");
      continue;
    }
    if (key == "ensemble-ratio") key = "ratio";
    if (value == "true" || value == "false") {
      if (value == "true") flags.push_back("--" + key);
      continue;
    }
    flags.push_back("--" + key + "=" + value);
  }
  args.insert(args.begin() + 1, flags.begin(), flags.end());
  return args;
}

int run(int argc, char** argv) {
  CLI::App app{"MGMT methylation classifier toolkit"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  // synth
  SyntheticConfig synth_cfg;
  std::string synth_out = "data";
  auto* synth = app.add_subcommand("synth", "generate the synthetic separable dataset");
  synth->add_option("--n", synth_cfg.n_cases, "number of cases")->capture_default_str();
  synth->add_option("--seed", synth_cfg.seed)->envname("LESIONNET_SEED")->capture_default_str();
  synth->add_option("--out", synth_out, "output directory")->capture_default_str();
  synth->add_option("--amplitude", synth_cfg.blob_amplitude, "lesion blob amplitude, 0 for no signal")->capture_default_str();
  synth->add_option("--size", synth_cfg.size)->capture_default_str();
  synth->add_option("--depth", synth_cfg.depth)->capture_default_str();

  // train
  TrainFlags train_flags;
  std::string train_data = "data", train_out = "run";
  auto* train_cmd = app.add_subcommand("train", "train one model with early stopping on validation AUC");
  add_train_flags(train_cmd, train_flags);
  train_cmd->add_option("--data", train_data, "dataset directory with labels.csv")->capture_default_str();
  train_cmd->add_option("--out", train_out, "run directory")->capture_default_str();

  // eval
  std::string eval_ckpt, eval_data = "data", eval_split = "val", eval_scores, eval_from_scores;
  auto* eval = app.add_subcommand("eval", "AUC of a checkpoint, or of a scores file");
  eval->add_option("--checkpoint", eval_ckpt, "weights file; run.cfg is read from the same directory");
  eval->add_option("--data", eval_data)->capture_default_str();
  eval->add_option("--split", eval_split, "val or all")->check(CLI::IsMember({"val", "all"}))->capture_default_str();
  eval->add_option("--scores", eval_scores, "where to write per-case scores");
  eval->add_option("--from-scores", eval_from_scores, "compute AUC from an existing case_id,score,label file");

  // predict
  std::array<std::string, 4> pred_ckpt;
  std::string pred_cases = "data", pred_ratio = "3:3:3:2", pred_out;
  auto* predict = app.add_subcommand("predict", "ensemble the four per-modality models");
  predict->add_option("--flair", pred_ckpt[0], "FLAIR checkpoint");
  predict->add_option("--t1w", pred_ckpt[1], "T1w checkpoint");
  predict->add_option("--t1gd", pred_ckpt[2], "T1Gd checkpoint");
  predict->add_option("--t2", pred_ckpt[3], "T2 checkpoint");
  predict->add_option("--cases", pred_cases, "directory of case folders")->capture_default_str();
  predict->add_option("--ratio", pred_ratio, "FLAIR:T1w:T1Gd:T2 weights")->capture_default_str();
  predict->add_option("--out", pred_out, "CSV output path (stdout when omitted)");

  // sweep
  TrainFlags sweep_flags;
  std::string sweep_data = "data", sweep_out;
  std::vector<std::string> sweep_list{"adam", "adadelta", "sgd", "rmsprop"};
  auto* sweep = app.add_subcommand("sweep", "same data and model, one run per optimizer");
  add_train_flags(sweep, sweep_flags);
  sweep->add_option("--data", sweep_data)->capture_default_str();
  sweep->add_option("--optimizers", sweep_list)->delimiter(',')->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)->capture_default_str();
  sweep->add_option("--out", sweep_out, "table output path");
  double sweep_adadelta_lr = kSweepAdadeltaLr;
  sweep->add_option("--adadelta-lr", sweep_adadelta_lr, "learning rate for the adadelta run")->capture_default_str();

  // bench
  TrainFlags bench_flags;
  std::string bench_data = "data", bench_out, bench_ms_variant;
  auto* bench = app.add_subcommand("bench", "EfficientNet-3D against Multiscale EfficientNet");
  add_train_flags(bench, bench_flags);
  bench->add_option("--data", bench_data)->capture_default_str();
  bench->add_option("--multiscale-variant", bench_ms_variant, "variant for the multiscale model (default: --variant)");
  bench->add_option("--out", bench_out, "table output path");

  std::vector<std::string> args(argv + 1, argv + argc);
  args = expand_config(std::move(args));
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (*synth) {
    gen_synthetic(synth_cfg, synth_out);
    std::cout << "wrote " << synth_cfg.n_cases << " cases to " << synth_out << '\n';
    return 0;
  }

  if (*train_cmd) {
    const auto cfg = train_flags.to_config();
    std::cout << cfg.summary() << '\n';
    const auto out = run_training(cfg, train_data, train_out, print_epoch);
    std::cout << "best epoch " << out.history.best_epoch << '\n';
    std::cout << "final val AUC " << format_auc(out.final_val_auc) << '\n';
    std::cout << "checkpoint " << out.checkpoint.string() << '\n';
    return 0;
  }

  if (*eval) {
    EvalOutcome res;
    if (!eval_from_scores.empty()) {
      res.scores = load_scores(eval_from_scores);
      res.auc = case_auc(res.scores);
    } else {
      if (eval_ckpt.empty()) throw Error("eval needs --checkpoint or --from-scores");
      const auto cfg = config_for_checkpoint(eval_ckpt);
      res = run_eval(cfg, eval_ckpt, eval_data, eval_split == "all" ? EvalSplit::all : EvalSplit::val);
      const auto scores_path = eval_scores.empty() ? fs::path(eval_ckpt).parent_path() / ("scores_" + eval_split + ".csv")
                                                   : fs::path(eval_scores);
      save_scores(res.scores, scores_path.string());
    }
    std::cout << "AUC " << format_auc(res.auc) << '\n';
    return 0;
  }

  if (*predict) {
    const auto weights = EnsembleWeights::parse(pred_ratio);
    std::array<std::optional<fs::path>, 4> ckpts;
    for (std::size_t m = 0; m < 4; ++m)
      if (!pred_ckpt[m].empty()) ckpts[m] = pred_ckpt[m];
    const auto preds = predict_ensemble(ckpts, pred_cases, weights);
    std::ostringstream os;
    os << "# ratio=" << pred_ratio << '\n' << "case_id,probability\n" << std::setprecision(9);
    for (const auto& p : preds) os << p.case_id << ',' << p.probability << '\n';
    if (pred_out.empty()) {
      std::cout << os.str();
    } else {
      write_text(pred_out, os.str());
    }
    return 0;
  }

  auto log_epoch = [](const std::string& name, const EpochRecord& r) {
    std::cout << name << ' ';
    print_epoch(r);
  };

  if (*sweep) {
    const auto base = sweep_flags.to_config();
    std::vector<OptimizerKind> kinds;
    for (const auto& s : sweep_list) kinds.push_back(parse_optimizer(s));
    const auto table = format_table("optimizer", sweep_optimizers(base, sweep_data, kinds, log_epoch, sweep_adadelta_lr));
    std::cout << table;
    if (!sweep_out.empty()) write_text(sweep_out, table);
    return 0;
  }

  if (*bench) {
    auto eff = bench_flags.to_config();
    eff.model = ModelKind::eff3d;
    eff.input.layout = RunConfig::default_layout(ModelKind::eff3d);
    auto ms = bench_flags.to_config();
    ms.model = ModelKind::multiscale;
    ms.input.layout = InputLayout::slices;
    if (!bench_ms_variant.empty()) ms.variant = bench_ms_variant;
    const auto table = format_table("model", benchmark_models(eff, ms, bench_data, log_epoch));
    std::cout << table;
    if (!bench_out.empty()) write_text(bench_out, table);
    return 0;
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kExitData;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << '\n';
    return kExitData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}
