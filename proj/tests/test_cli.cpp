#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "lesionnet/experiments/pipeline.hpp"
#include "test_util.hpp"

using namespace lesionnet;
namespace fs = std::filesystem;
using testutil::read_file;
using testutil::scratch_dir;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + LESIONNET_CLI_PATH + std::string(" ") + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) throw std::runtime_error("popen failed");
  Result r;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> v;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

std::map<std::string, double> probabilities(const std::string& csv) {
  std::map<std::string, double> m;
  for (const auto& l : lines_of(csv)) {
    const auto comma = l.find(',');
    if (l.empty() || l[0] == '#' || comma == std::string::npos || l.substr(comma + 1) == "probability") continue;
    m[l.substr(0, comma)] = std::stod(l.substr(comma + 1));
  }
  return m;
}

const std::string kTiny = " --variant custom:0.25,0.5 --size 32 --lr 1e-3 --no-augment";

// Shared fixtures: one synthetic set and one short T2 volume run.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = scratch_dir("cli");
    data_ = root_ / "data";
    ASSERT_EQ(cli("synth --n 40 --seed 7 --out " + data_.string()).code, 0);
    t2_run_ = root_ / "t2";
    const auto r = cli("train --data " + data_.string() + " --out " + t2_run_.string() + kTiny +
                       " --input volume --modality T2 --epochs 3");
    ASSERT_EQ(r.code, 0) << r.out;
  }
  static inline fs::path root_, data_, t2_run_;
};

}  // namespace

TEST_F(Cli, SynthWritesFourVolumesPerCaseAndIsDeterministic) {
  std::size_t volumes = 0;
  for (const auto& e : fs::recursive_directory_iterator(data_)) volumes += e.path().extension() == ".mvol";
  EXPECT_EQ(volumes, 160u);
  EXPECT_TRUE(fs::exists(data_ / "labels.csv"));
  const auto again = root_ / "again";
  ASSERT_EQ(cli("synth --n 40 --seed 7 --out " + again.string()).code, 0);
  for (const auto& e : fs::recursive_directory_iterator(data_)) {
    if (e.is_regular_file()) {
      EXPECT_EQ(read_file(e.path()), read_file(again / fs::relative(e.path(), data_)));
    }
  }
  const auto r = cli("synth --n 2 --out " + (root_ / "two").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("4 cases"), std::string::npos) << r.out;
}

TEST_F(Cli, TrainWritesCheckpointHistoryAndConfig) {
  EXPECT_TRUE(fs::exists(t2_run_ / "best.lnwt"));
  EXPECT_TRUE(fs::exists(t2_run_ / "run.cfg"));
  const auto hist = lines_of(read_file(t2_run_ / "history.csv"));
  ASSERT_GE(hist.size(), 3u);
  EXPECT_EQ(hist[0].rfind("# ", 0), 0u);
  EXPECT_NE(hist[0].find("optimizer=adam"), std::string::npos);
  EXPECT_EQ(hist[1], "epoch,train_loss,val_auc");
  EXPECT_LE(hist.size() - 2, 3u);
  const auto cfg = RunConfig::load(t2_run_ / "run.cfg");
  EXPECT_EQ(cfg.input.modality, Modality::t2);
  EXPECT_EQ(cfg.variant, "custom:0.25,0.5");
}

TEST_F(Cli, OptimizerRecordedInHistoryHeader) {
  const auto out = root_ / "rms";
  const auto r = cli("train --data " + data_.string() + " --out " + out.string() + kTiny + " --optimizer rmsprop --epochs 1");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(lines_of(read_file(out / "history.csv"))[0].find("optimizer=rmsprop"), std::string::npos);
  EXPECT_NE(r.out.find("final val AUC 0."), std::string::npos) << r.out;
}

TEST_F(Cli, TrainRejectsBadInputs) {
  const auto empty = scratch_dir("cli_nolabels");
  fs::copy(data_, empty, fs::copy_options::recursive);
  fs::remove(empty / "labels.csv");
  EXPECT_EQ(cli("train --data " + empty.string() + " --out " + (root_ / "x").string() + kTiny + " --epochs 1").code, 2);
  EXPECT_EQ(cli("train --data " + data_.string() + " --optimizer adagrad --epochs 1").code, 1);
  EXPECT_EQ(cli("train --data " + data_.string() + " --epochs=abc").code, 1);
  const auto blowup = cli("train --data " + data_.string() + " --out " + (root_ / "nan").string() +
                          " --variant custom:0.25,0.5 --size 32 --optimizer sgd --lr 1e30 --epochs 2");
  EXPECT_EQ(blowup.code, 3);
  EXPECT_NE(blowup.out.find("non-finite"), std::string::npos) << blowup.out;
  EXPECT_EQ(cli("frobnicate").code, 1);
  EXPECT_EQ(cli("").code, 1);
}

TEST_F(Cli, ConfigFileWithFlagsWinning) {
  const auto cfg = root_ / "run.conf";
  std::ofstream(cfg) << "# tiny run\noptimizer = sgd\nepochs = 1\nseed = 5\naugment = false\nvariant = custom:0.25,0.5\nsize = 32\n";
  auto r = cli("train --config " + cfg.string() + " --data " + data_.string() + " --out " + (root_ / "c1").string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("optimizer=sgd"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("seed=5"), std::string::npos) << r.out;
  r = cli("train --config " + cfg.string() + " --optimizer adadelta --data " + data_.string() + " --out " +
          (root_ / "c2").string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("optimizer=adadelta"), std::string::npos) << r.out;
  // the environment beats the file, an explicit flag beats both
  r = cli("train --config " + cfg.string() + " --data " + data_.string() + " --out " + (root_ / "c3").string(),
          "LESIONNET_SEED=42");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("seed=42"), std::string::npos) << r.out;
  r = cli("train --config " + cfg.string() + " --seed 9 --data " + data_.string() + " --out " + (root_ / "c4").string(),
          "LESIONNET_SEED=42");
  EXPECT_NE(r.out.find("seed=9"), std::string::npos) << r.out;
  EXPECT_EQ(cli("train --config " + (root_ / "missing.conf").string()).code, 1);
}

TEST_F(Cli, EvalPrintsFiveDecimalAucAndWritesScores) {
  const auto ckpt = (t2_run_ / "best.lnwt").string();
  auto r = cli("eval --checkpoint " + ckpt + " --data " + data_.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto pos = r.out.find("AUC ");
  ASSERT_NE(pos, std::string::npos);
  const auto auc = r.out.substr(pos + 4, 7);
  EXPECT_TRUE(auc[0] == '0' || auc[0] == '1');
  EXPECT_EQ(auc[1], '.');
  const auto scores = load_scores((t2_run_ / "scores_val.csv").string());
  EXPECT_EQ(scores.size(), 10u);
  EXPECT_NEAR(case_auc(scores), std::stod(auc), 5e-6);
  // the stored scores reproduce the printed number
  r = cli("eval --from-scores " + (t2_run_ / "scores_val.csv").string());
  EXPECT_NE(r.out.find("AUC " + auc), std::string::npos) << r.out;
  r = cli("eval --checkpoint " + ckpt + " --data " + data_.string() + " --split all");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(load_scores((t2_run_ / "scores_all.csv").string()).size(), 40u);
}

TEST_F(Cli, EvalFailures) {
  const auto one_class = scratch_dir("cli_oneclass");
  fs::copy(data_, one_class, fs::copy_options::recursive);
  auto labels = load_labels((one_class / "labels.csv").string());
  for (auto& [id, l] : labels) l = 1;
  save_labels(labels, (one_class / "labels.csv").string());
  const auto ckpt = (t2_run_ / "best.lnwt").string();
  auto r = cli("eval --checkpoint " + ckpt + " --data " + one_class.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("degenerate labels"), std::string::npos) << r.out;

  // checkpoint against a wider model
  const auto wide = scratch_dir("cli_wide");
  fs::copy_file(t2_run_ / "best.lnwt", wide / "best.lnwt");
  auto cfg = RunConfig::load(t2_run_ / "run.cfg");
  cfg.variant = "custom:0.5,0.5";
  cfg.save(wide / "run.cfg");
  r = cli("eval --checkpoint " + (wide / "best.lnwt").string() + " --data " + data_.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("backbone."), std::string::npos) << r.out;
  EXPECT_NE(cli("eval --checkpoint " + (root_ / "nope.lnwt").string() + " --data " + data_.string()).code, 0);
  EXPECT_EQ(cli("eval --data " + data_.string()).code, 1);
}

TEST_F(Cli, PredictEnsemble) {
  // constant-logit model: every weight zero except the classifier bias
  auto cfg = RunConfig::load(t2_run_ / "run.cfg");
  auto model = build_model<float>(cfg);
  for (auto e : model->parameters().entries()) {
    if (!e.learnable) continue;
    auto& a = e.tensor.mutable_value();
    for (auto& v : a.data()) v = e.name == "classifier.bias" ? 0.75f : 0.0f;
  }
  const auto const_dir = scratch_dir("cli_const");
  save_weights(model->parameters(), (const_dir / "best.lnwt").string());
  cfg.save(const_dir / "run.cfg");
  const auto c = (const_dir / "best.lnwt").string(), t2 = (t2_run_ / "best.lnwt").string();

  auto r = cli("predict --flair " + c + " --t1w " + c + " --t1gd " + c + " --t2 " + c + " --cases " + data_.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(lines_of(r.out)[0], "# ratio=3:3:3:2");
  EXPECT_EQ(lines_of(r.out)[1], "case_id,probability");
  const auto same = probabilities(r.out);
  EXPECT_EQ(same.size(), 40u);
  for (const auto& [id, p] : same) EXPECT_NEAR(p, 1.0 / (1.0 + std::exp(-0.75)), 1e-7) << id;

  // a lone T2 weight reproduces the T2 model, whatever the other checkpoints are
  r = cli("predict --flair " + c + " --t1w " + c + " --t1gd " + c + " --t2 " + t2 + " --ratio 0:0:0:1 --cases " +
          data_.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(lines_of(r.out)[0], "# ratio=0:0:0:1");
  const auto all_four = probabilities(r.out);
  const auto out_csv = root_ / "pred" / "t2.csv";
  r = cli("predict --t2 " + t2 + " --ratio 0:0:0:1 --cases " + data_.string() + " --out " + out_csv.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto alone = probabilities(read_file(out_csv));
  EXPECT_EQ(all_four, alone);
  auto t2_model = load_model(RunConfig::load(t2_run_ / "run.cfg"), t2);
  const auto ids = list_cases(data_);
  const auto direct = predict_cases(*t2_model, load_samples(data_, ids, {}, t2_model ? RunConfig::load(t2_run_ / "run.cfg").input : InputSpec{}));
  ASSERT_EQ(direct.size(), alone.size());
  for (const auto& s : direct) EXPECT_NEAR(alone.at(s.case_id), s.score, 1e-8);

  r = cli("predict --t2 " + t2 + " --cases " + data_.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("missing checkpoint"), std::string::npos) << r.out;
  EXPECT_EQ(cli("predict --t2 " + t2 + " --ratio 0:0:0:0 --cases " + data_.string()).code, 2);
}

TEST(CliConfig, RunConfigRoundTripAndDefaults) {
  const RunConfig d;
  EXPECT_EQ(d.train.optimizer.kind, OptimizerKind::adam);
  EXPECT_EQ(d.train.optimizer.lr, 1e-4);
  EXPECT_EQ(d.train.epochs, 100u);
  EXPECT_EQ(d.variant, "b0");
  EXPECT_EQ(d.model, ModelKind::eff3d);
  auto c = RunConfig::from_map({{"model", "multiscale"}, {"optimizer", "adadelta"}, {"lr", "0.3"}, {"seed", "11"},
                                {"ensemble_ratio", "2:4:2:2"}, {"window", "3"}});
  const auto dir = scratch_dir("cli_cfg");
  c.save(dir / "run.cfg");
  const auto back = RunConfig::load(dir / "run.cfg");
  EXPECT_EQ(back.to_map(), c.to_map());
  EXPECT_EQ(back.input.layout, InputLayout::slices);
  EXPECT_THROW(RunConfig::from_map({{"epochs", "many"}}), Error);
  EXPECT_THROW(RunConfig::from_map({{"model", "resnet"}}), Error);
  auto bad = RunConfig::from_map({{"model", "eff3d"}, {"input", "slices"}});
  EXPECT_THROW(bad.validate(), Error);
}

// Untrained models on synthetic-40 without the blob stay inside the
// uninformative band for every seed.
TEST(CliConfig, FreshModelAucInUninformativeBand) {
  const auto dir = scratch_dir("cli_fresh");
  SyntheticConfig sc;
  sc.blob_amplitude = 0.0;
  const auto labels = gen_synthetic(sc, dir);
  RunConfig cfg = RunConfig::from_map({{"variant", "custom:0.25,0.5"}, {"size", "32"}});
  const auto samples = load_samples(dir, list_cases(dir), labels, cfg.input);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    cfg.train.seed = seed;
    auto model = build_model<float>(cfg);
    const double auc = evaluate_auc(*model, samples);
    EXPECT_GE(auc, 0.2) << seed;
    EXPECT_LE(auc, 0.8) << seed;
  }
}
