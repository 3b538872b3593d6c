#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "lesionnet/data/augment.hpp"
#include "lesionnet/data/dataset.hpp"
#include "lesionnet/data/ensemble.hpp"
#include "lesionnet/data/split.hpp"
#include "lesionnet/data/synthetic.hpp"
#include "lesionnet/train/trainer.hpp"
#include "test_util.hpp"

using namespace lesionnet;
using testutil::scratch_dir;
using testutil::uniform_int;

namespace {

Array<float> random_image(const Shape& s, Rng& rng, float lo = 0.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  Array<float> a(s);
  for (auto& v : a.data()) v = u(rng);
  return a;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

std::map<std::string, int> labels_from(const std::string& text) {
  std::istringstream in(text);
  return parse_labels(in);
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

// Mean voxel intensity over all four modalities: the simplest classifier
// that can see a bright blob.
double mean_intensity(const SyntheticCase& c) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& v : c.volumes) {
    for (float x : v.data()) s += x;
    n += v.size();
  }
  return s / static_cast<double>(n);
}

double mean_intensity_auc(const SyntheticConfig& cfg) {
  const auto labels = synthetic_labels(cfg.n_cases, cfg.seed);
  ScoredDataset d;
  for (std::size_t i = 0; i < cfg.n_cases; ++i) {
    const double m = mean_intensity(make_synthetic_case(cfg, i, labels[i]));
    (labels[i] ? d.pos : d.neg).push_back(m);
  }
  return auc_wmw(d);
}

}  // namespace

TEST(Mvol, RoundTripIsBitExact) {
  const auto dir = scratch_dir("mvol_rt");
  Array<float> ramp(Shape{4, 8, 8});
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<float>(i) * 0.37f - 3.0f;
  save_volume(ramp, (dir / "ramp.mvol").string());
  EXPECT_EQ(load_volume_voxels((dir / "ramp.mvol").string()), ramp);
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const Shape s{uniform_int(rng, 1, 5), uniform_int(rng, 1, 9), uniform_int(rng, 1, 9)};
    auto v = random_image(s, rng, -1e6f, 1e6f);
    v[0] = -0.0f;
    v[v.size() - 1] = std::numeric_limits<float>::denorm_min();
    save_volume(v, (dir / "r.mvol").string());
    const auto back = load_volume_voxels((dir / "r.mvol").string());
    ASSERT_EQ(back.shape(), s);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(std::bit_cast<std::uint32_t>(back[i]), std::bit_cast<std::uint32_t>(v[i]));
  }
  const auto rec = load_volume((dir / "ramp.mvol").string(), "00007", Modality::t2, 1);
  EXPECT_EQ(rec.case_id, "00007");
  EXPECT_EQ(rec.modality, Modality::t2);
  EXPECT_EQ(*rec.label, 1);
}

TEST(Mvol, HeaderLayout) {
  const auto dir = scratch_dir("mvol_layout");
  save_volume(Array<float>(Shape{2, 3, 5}, 1.0f), (dir / "v.mvol").string());
  const auto b = testutil::read_file(dir / "v.mvol");
  ASSERT_EQ(b.size(), 24u + 30 * 4);
  EXPECT_EQ(b.substr(0, 4), "MVOL");
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[6], 3);
  EXPECT_EQ(b[8], 2);
  EXPECT_EQ(b[12], 3);
  EXPECT_EQ(b[16], 5);
  EXPECT_EQ(b[20], 1);
}

TEST(Mvol, DistinctDiagnostics) {
  const auto dir = scratch_dir("mvol_bad");
  save_volume(Array<float>(Shape{2, 4, 4}, 0.5f), (dir / "ok.mvol").string());
  const auto good = testutil::read_file(dir / "ok.mvol");
  auto load = [&](const std::string& name, const std::string& bytes) {
    write_bytes(dir / name, bytes);
    return error_of([&] { load_volume_voxels((dir / name).string()); });
  };
  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_NE(load("magic.mvol", bad_magic).find("bad magic"), std::string::npos);
  EXPECT_NE(load("short.mvol", good.substr(0, good.size() - 4)).find("needs"), std::string::npos);
  EXPECT_NE(load("long.mvol", good + "abcd").find("needs"), std::string::npos);
  EXPECT_NE(load("header.mvol", good.substr(0, 10)).find("truncated"), std::string::npos);
  auto bad_dtype = good;
  bad_dtype[20] = 2;
  EXPECT_NE(load("dtype.mvol", bad_dtype).find("dtype"), std::string::npos);
  auto bad_rank = good;
  bad_rank[6] = 2;
  EXPECT_NE(load("rank.mvol", bad_rank).find("rank"), std::string::npos);
  auto zero = good;
  zero[8] = 0;
  EXPECT_NE(load("zero.mvol", zero).find("zero extent"), std::string::npos);
  EXPECT_THROW(load_volume_voxels((dir / "missing.mvol").string()), FormatError);
  // zero-depth arrays cannot be built in the first place
  EXPECT_THROW(Array<float>(Shape{0, 4, 4}), Error);
  EXPECT_THROW(save_volume(Array<float>(Shape{4, 4}), (dir / "flat.mvol").string()), DataError);
  EXPECT_THROW(save_volume(VolumeRecord{"x", Modality::flair, Array<float>(Shape{1, 2, 2}), 2}, (dir / "l.mvol").string()),
               DataError);
}

TEST(Labels, Parsing) {
  EXPECT_EQ(labels_from("id,MGMT_value\n00001,1\n"), (std::map<std::string, int>{{"00001", 1}}));
  const auto many = labels_from("case_id,MGMT_value\r\n00002,0\r\n\n# note\n00003, 1 \n");
  EXPECT_EQ(many.size(), 2u);
  EXPECT_EQ(many.at("00003"), 1);
  auto msg = error_of([] { labels_from("id,MGMT_value\n00001,1\n00002,2\n"); });
  EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
  msg = error_of([] { labels_from("id,MGMT_value\n00001,1\n00001,0\n"); });
  EXPECT_NE(msg.find("duplicate"), std::string::npos) << msg;
  EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
  msg = error_of([] { labels_from("id,MGMT_value\n00001\n"); });
  EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
  EXPECT_THROW(labels_from(""), FormatError);
  EXPECT_THROW(labels_from("only_one_column\n"), FormatError);
  EXPECT_THROW(labels_from("id,v\n,1\n"), FormatError);
  EXPECT_THROW(labels_from("id,v\na,yes\n"), DataError);
}

TEST(Labels, SaveLoadRoundTrip) {
  const auto dir = scratch_dir("labels_rt");
  const std::map<std::string, int> m{{"00000", 0}, {"00001", 1}, {"00420", 1}};
  save_labels(m, (dir / "labels.csv").string());
  EXPECT_EQ(load_labels((dir / "labels.csv").string()), m);
  EXPECT_THROW(load_labels((dir / "nope.csv").string()), FormatError);
}

TEST(Scores, Parsing) {
  std::istringstream in("case_id,score,label\na,0.25,1\nb,1e-3,0\n");
  const auto s = parse_scores(in);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[1].score, 1e-3);
  EXPECT_EQ(s[0].label, 1);
  std::istringstream bad("a,0.5,1\nb,x,0\n");
  EXPECT_THROW(parse_scores(bad), FormatError);
  std::istringstream short_row("a,0.5\n");
  EXPECT_THROW(parse_scores(short_row), FormatError);
  const auto dir = scratch_dir("scores_rt");
  save_scores(s, (dir / "s.csv").string());
  const auto back = load_scores((dir / "s.csv").string());
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].case_id, "a");
  EXPECT_EQ(back[0].score, 0.25);
}

TEST(Resize, IdentityConstantAndCheckerboard) {
  Rng rng(2);
  const auto img = random_image({256, 256}, rng);
  EXPECT_EQ(resize_bilinear(img, 256, 256), img);
  const Array<float> c(Shape{7, 5}, 0.3f);
  for (float v : resize_bilinear(c, 256, 256).data()) EXPECT_FLOAT_EQ(v, 0.3f);
  const Array<float> checker(Shape{2, 2}, {0.0f, 1.0f, 1.0f, 0.0f});
  const auto r = resize_bilinear(checker, 3, 3);
  EXPECT_FLOAT_EQ(r[4], 0.5f);
  // corner-aligned: corners are copied
  EXPECT_EQ(r[0], 0.0f);
  EXPECT_EQ(r[2], 1.0f);
  EXPECT_EQ(r[8], 0.0f);
  EXPECT_THROW(resize_bilinear(Array<float>(Shape{1, 5}), 4, 4), ShapeError);
  EXPECT_THROW(resize_bilinear(Array<float>(Shape{2, 2, 2}), 4, 4), ShapeError);
}

TEST(Resize, StaysWithinInputRange) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto img = random_image({uniform_int(rng, 2, 20), uniform_int(rng, 2, 20)}, rng, -5, 5);
    const auto [lo, hi] = std::minmax_element(img.data().begin(), img.data().end());
    const auto r = resize_bilinear(img, uniform_int(rng, 2, 40), uniform_int(rng, 2, 40));
    for (float v : r.data()) {
      EXPECT_GE(v, *lo - 1e-5f);
      EXPECT_LE(v, *hi + 1e-5f);
    }
  }
  const auto vol = resize_volume(random_image({3, 6, 6}, rng), 10, 12);
  EXPECT_EQ(vol.shape(), (Shape{3, 10, 12}));
}

TEST(Rescale, ExamplesAndRange) {
  const Array<float> x(Shape{4}, {255.0f, 0.0f, 127.5f, 51.0f});
  const auto y = rescale(x);
  EXPECT_EQ(y[0], 1.0f);
  EXPECT_EQ(y[1], 0.0f);
  EXPECT_EQ(y[2], 0.5f);
  EXPECT_FLOAT_EQ(y[3], 0.2f);
  EXPECT_THROW(rescale(Array<float>(Shape{1}, 255.5f)), DataError);
  EXPECT_THROW(rescale(Array<float>(Shape{1}, -0.1f)), DataError);
  EXPECT_THROW(rescale(Array<float>(Shape{1}, std::nanf(""))), DataError);
  const auto msg = error_of([] { rescale(Array<float>(Shape{3}, {1.0f, 2.0f, 300.0f})); });
  EXPECT_NE(msg.find("index 2"), std::string::npos);
}

TEST(Rescale, InverseOfScalingWithinOneUlp) {
  Rng rng(4);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int t = 0; t < 100000; ++t) {
    const float x = u(rng);
    const float back = rescale(Array<float>(Shape{1}, x * 255.0f))[0];
    EXPECT_LE(std::abs(back - x), std::nextafter(x, 2.0f) - x) << x;
  }
}

TEST(Split, CountsAndPartition) {
  auto ids = [](std::size_t n) {
    std::vector<std::string> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back(case_id_for(i));
    return v;
  };
  const auto s585 = split(ids(585), 0);
  EXPECT_EQ(s585.train_ids.size(), 439u);
  EXPECT_EQ(s585.val_ids.size(), 146u);
  const auto s4 = split(ids(4), 0);
  EXPECT_EQ(s4.train_ids.size(), 3u);
  EXPECT_EQ(s4.val_ids.size(), 1u);
  EXPECT_THROW(split(ids(3), 0), DataError);
  EXPECT_THROW(split({"a", "b", "a", "c"}, 0), DataError);
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = uniform_int(rng, 4, 300);
    const std::uint64_t seed = rng();
    auto all = ids(n);
    const auto s = split(all, seed);
    EXPECT_EQ(s.train_ids.size(), static_cast<std::size_t>(std::lround(0.75 * n)));
    std::set<std::string> seen(s.train_ids.begin(), s.train_ids.end());
    for (const auto& v : s.val_ids) EXPECT_TRUE(seen.insert(v).second) << v;
    EXPECT_EQ(seen, std::set<std::string>(all.begin(), all.end()));
    // deterministic, and independent of input order
    std::reverse(all.begin(), all.end());
    const auto again = split(all, seed);
    EXPECT_EQ(again.train_ids, s.train_ids);
    EXPECT_EQ(again.val_ids, s.val_ids);
  }
  EXPECT_NE(split(ids(40), 1).train_ids, split(ids(40), 2).train_ids);
}

TEST(Augment, FlipsAreInvolutions) {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    const auto img = random_image({uniform_int(rng, 1, 12), uniform_int(rng, 1, 12)}, rng);
    EXPECT_EQ(hflip(hflip(img)), img);
    EXPECT_EQ(vflip(vflip(img)), img);
    EXPECT_EQ(hflip(vflip(img)), vflip(hflip(img)));
  }
  const Array<float> row(Shape{1, 3}, {1.0f, 2.0f, 3.0f});
  EXPECT_EQ(hflip(row), (Array<float>(Shape{1, 3}, {3.0f, 2.0f, 1.0f})));
  const Array<float> col(Shape{2, 1}, {1.0f, 2.0f});
  EXPECT_EQ(vflip(col), (Array<float>(Shape{2, 1}, {2.0f, 1.0f})));
}

TEST(Augment, NoFlipZeroAngleIsIdentity) {
  Rng rng(7);
  const auto x = random_image({3, 9, 9}, rng);
  EXPECT_EQ(apply_augment(x, AugmentParams{}), x);
  EXPECT_EQ(rotate(x.reshaped({27, 9}), 0.0), x.reshaped({27, 9}));
  AugmentConfig off{0.0, 0.0};
  for (int t = 0; t < 20; ++t) EXPECT_EQ(augment(x, rng, off), x);
  // full turn and quarter turns on a square grid land back on pixel centres
  const auto img = random_image({8, 8}, rng);
  const auto r360 = rotate(img, 360.0);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(r360[i], img[i], 1e-5);
  const auto r90 = rotate(rotate(rotate(rotate(img, 90.0), 90.0), 90.0), 90.0);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(r90[i], img[i], 1e-5);
}

TEST(Augment, ConstantDiskIsRotationInvariantInside) {
  const std::size_t s = 41;
  const double c = 20.0, radius = 15.0;
  Array<float> disk(Shape{s, s});
  for (std::size_t y = 0; y < s; ++y)
    for (std::size_t x = 0; x < s; ++x)
      disk[y * s + x] = std::hypot(y - c, x - c) <= radius ? 0.8f : 0.0f;
  Rng rng(8);
  std::uniform_real_distribution<double> angle(-36.0, 36.0);
  for (int t = 0; t < 30; ++t) {
    const auto r = rotate(disk, t == 0 ? 90.0 : angle(rng));
    for (std::size_t y = 0; y < s; ++y)
      for (std::size_t x = 0; x < s; ++x) {
        // all four bilinear neighbours of the source point are inside the disk
        const double d = std::hypot(y - c, x - c);
        if (d <= radius - 2.0) {
          EXPECT_NEAR(r[y * s + x], 0.8f, 1e-6);
        } else if (d >= radius + 2.0) {
          EXPECT_EQ(r[y * s + x], 0.0f);
        }
      }
  }
}

TEST(Augment, SampledParametersAndDeterminism) {
  Rng rng(9);
  int h = 0, v = 0;
  const int n = 20000;
  for (int t = 0; t < n; ++t) {
    const auto p = sample_augment(rng);
    h += p.hflip;
    v += p.vflip;
    EXPECT_LE(std::abs(p.angle_deg), 36.0);
  }
  EXPECT_NEAR(h / static_cast<double>(n), 0.5, 0.02);
  EXPECT_NEAR(v / static_cast<double>(n), 0.5, 0.02);
  const auto x = random_image({1, 4, 16, 16}, rng);
  Rng a(stream_seed(1, "00003", 7)), b(stream_seed(1, "00003", 7)), c(stream_seed(1, "00003", 8));
  EXPECT_EQ(augment(x, a), augment(x, b));
  // same transform on every plane
  const AugmentParams p{true, false, 10.0};
  const auto y = apply_augment(x, p);
  const Array<float> plane0(Shape{16, 16}, std::vector<float>(x.data().begin(), x.data().begin() + 256));
  const auto want = rotate(hflip(plane0), 10.0);
  for (std::size_t i = 0; i < 256; ++i) EXPECT_EQ(y[i], want[i]);
}

TEST(Slices, CountsAndContents) {
  Array<float> vol(Shape{4, 2, 2});
  for (std::size_t i = 0; i < vol.size(); ++i) vol[i] = static_cast<float>(i / 4);  // slice index
  const auto s = extract_slices(vol);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].shape(), (Shape{3, 2, 2}));
  EXPECT_EQ(s[0][0], 0.0f);
  EXPECT_EQ(s[0][11], 2.0f);
  EXPECT_EQ(s[1][0], 1.0f);
  EXPECT_EQ(s[1][11], 3.0f);
  EXPECT_EQ(extract_slices(Array<float>(Shape{3, 2, 2})).size(), 1u);
  EXPECT_THROW(extract_slices(Array<float>(Shape{2, 2, 2})), DataError);
  const auto flat = extract_slices(Array<float>(Shape{7, 3, 3}, 0.25f));
  EXPECT_EQ(flat.size(), 5u);
  for (const auto& a : flat) EXPECT_EQ(a, flat[0]);
}

TEST(Ensemble, PresetsAndExamples) {
  const auto w = EnsembleWeights::preset_3332();
  EXPECT_NEAR(w[0], 3.0 / 11, 1e-15);
  EXPECT_NEAR(w[3], 2.0 / 11, 1e-15);
  EXPECT_NEAR(w[0] + w[1] + w[2] + w[3], 1.0, 1e-12);
  EXPECT_NEAR(ensemble_predict({1, 0, 0, 0}, w), 3.0 / 11, 1e-15);
  EXPECT_NEAR(ensemble_predict({1, 0, 0, 0}, w), 0.272727, 1e-6);
  EXPECT_NEAR(ensemble_predict({0, 1, 0, 0}, EnsembleWeights::preset_2422()), 0.4, 1e-15);
  EXPECT_NEAR(ensemble_predict({0.7, 0.7, 0.7, 0.7}, EnsembleWeights::parse("5:0:1.5:2")), 0.7, 1e-15);
  EXPECT_EQ(ensemble_predict({0.1, 0.2, 0.3, 0.9}, EnsembleWeights::parse("0:0:0:1")), 0.9);
  EXPECT_THROW(EnsembleWeights::parse("0:0:0:0"), DataError);
  EXPECT_THROW(EnsembleWeights::parse("1:2:3"), DataError);
  EXPECT_THROW(EnsembleWeights::parse("1:2:3:4:5"), DataError);
  EXPECT_THROW(EnsembleWeights::parse("1:-2:3:4"), DataError);
  EXPECT_THROW(EnsembleWeights::parse("1:x:3:4"), DataError);
  EXPECT_THROW(ensemble_predict({1.5, 0, 0, 0}, w), DataError);
}

TEST(Ensemble, BoundedAndLinear) {
  Rng rng(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 500; ++t) {
    std::array<double, 4> raw{}, p{};
    for (auto& r : raw) r = rng() % 3 == 0 ? 0.0 : u(rng) * 10;
    if (raw[0] + raw[1] + raw[2] + raw[3] == 0.0) raw[1] = 1.0;
    for (auto& x : p) x = u(rng);
    const EnsembleWeights w(raw);
    double sum = 0;
    for (double x : w.weights()) {
      EXPECT_GE(x, 0.0);
      sum += x;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    const double e = ensemble_predict(p, w);
    EXPECT_GE(e, *std::min_element(p.begin(), p.end()) - 1e-15);
    EXPECT_LE(e, *std::max_element(p.begin(), p.end()) + 1e-15);
    // linear in each coordinate: slope equals that modality's weight
    const std::size_t k = rng() % 4;
    auto q = p;
    q[k] = u(rng);
    EXPECT_NEAR(ensemble_predict(q, w) - e, w[k] * (q[k] - p[k]), 1e-14);
  }
}

TEST(Synthetic, DeterministicFileSet) {
  const auto a = scratch_dir("synth_a"), b = scratch_dir("synth_b");
  SyntheticConfig cfg;
  cfg.seed = 17;
  const auto la = gen_synthetic(cfg, a);
  gen_synthetic(cfg, b);
  EXPECT_EQ(la.size(), 40u);
  std::size_t files = 0, pos = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto rel = std::filesystem::relative(e.path(), a);
    EXPECT_EQ(testutil::read_file(e.path()), testutil::read_file(b / rel)) << rel;
  }
  EXPECT_EQ(files, 4u * 40 + 1);
  for (const auto& [id, l] : la) pos += l;
  EXPECT_EQ(pos, 20u);
  EXPECT_EQ(load_labels((a / "labels.csv").string()), la);
  // every volume stays in 8-bit range
  for (const auto& [id, l] : la)
    for (auto m : kModalities) {
      const auto v = load_volume_voxels(volume_path(a, id, m).string());
      EXPECT_EQ(v.shape(), (Shape{4, 32, 32}));
      for (float x : v.data()) ASSERT_TRUE(x >= 0.0f && x <= 255.0f);
    }
  cfg.n_cases = 3;
  EXPECT_THROW(gen_synthetic(cfg, scratch_dir("synth_c")), DataError);
}

TEST(Synthetic, ModalitiesHaveDistinctProfiles) {
  SyntheticConfig cfg;
  const auto c = make_synthetic_case(cfg, 0, 0);
  std::vector<double> means;
  for (const auto& v : c.volumes) {
    double s = 0;
    for (float x : v.data()) s += x;
    means.push_back(s / static_cast<double>(v.size()));
  }
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) EXPECT_GT(std::abs(means[i] - means[j]), 5.0);
}

TEST(Synthetic, MeanIntensityOracle) {
  SyntheticConfig cfg;
  cfg.n_cases = 200;
  cfg.seed = 3;
  EXPECT_GT(mean_intensity_auc(cfg), 0.9);
  cfg.blob_amplitude = 0.0;
  EXPECT_NEAR(mean_intensity_auc(cfg), 0.5, 0.1);
}

// Null-signal run: a tiny model trained on blob-free data scores a large
// fresh held-out set at chance level.
TEST(Synthetic, NullSignalTrainsToChance) {
  const auto train_dir = scratch_dir("null_train"), test_dir = scratch_dir("null_test");
  SyntheticConfig cfg;
  cfg.blob_amplitude = 0.0;
  cfg.n_cases = 80;
  cfg.seed = 5;
  const auto train_labels = gen_synthetic(cfg, train_dir);
  cfg.n_cases = 400;
  cfg.seed = 6;
  const auto test_labels = gen_synthetic(cfg, test_dir);
  InputSpec spec;
  spec.size = 32;
  const auto s = split(list_cases(train_dir), 0);
  const auto tr = load_samples(train_dir, s.train_ids, train_labels, spec);
  const auto va = load_samples(train_dir, s.val_ids, train_labels, spec);
  const auto te = load_samples(test_dir, list_cases(test_dir), test_labels, spec);
  auto model = build_efficientnet<float>(3, ScaledVariant::custom(0.25, 0.5), 1, {4, 32, 32}, 1);
  TrainConfig tc;
  tc.optimizer.lr = 1e-3;
  tc.epochs = 5;
  train(*model, tr, va, tc);
  EXPECT_NEAR(evaluate_auc(*model, te), 0.5, 0.1);
}

TEST(Dataset, LayoutsProduceDeclaredShapes) {
  const auto dir = scratch_dir("layouts");
  SyntheticConfig cfg;
  cfg.n_cases = 4;
  cfg.depth = 5;
  cfg.size = 20;
  const auto labels = gen_synthetic(cfg, dir);
  const auto ids = list_cases(dir);
  ASSERT_EQ(ids.size(), 4u);
  InputSpec spec;
  spec.size = 24;
  auto stack = load_samples(dir, ids, labels, spec);
  ASSERT_EQ(stack.size(), 4u);
  EXPECT_EQ(stack[0].input.shape(), (Shape{1, 4, 24, 24}));
  for (float v : stack[0].input.data()) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
  spec.layout = InputLayout::volume;
  EXPECT_EQ(load_samples(dir, ids, labels, spec)[0].input.shape(), (Shape{1, 5, 24, 24}));
  spec.layout = InputLayout::slices;
  const auto slices = load_samples(dir, ids, labels, spec);
  ASSERT_EQ(slices.size(), 4u * 3);
  EXPECT_EQ(slices[0].input.shape(), (Shape{3, 24, 24}));
  EXPECT_EQ(slices[0].case_id, slices[2].case_id);
  EXPECT_EQ(slices[0].label, labels.at(ids[0]));
  // stack layout takes the middle slice of each modality, in modality order
  spec.layout = InputLayout::modality_stack;
  spec.size = 20;
  const auto raw = load_samples(dir, {ids[1]}, labels, spec)[0].input;
  const auto t1gd = load_volume_voxels(volume_path(dir, ids[1], Modality::t1gd).string());
  for (std::size_t i = 0; i < 400; ++i) EXPECT_FLOAT_EQ(raw[2 * 400 + i], t1gd[2 * 400 + i] / 255.0f);
  spec.normalization = {{0.5f}, {2.0f}};
  const auto norm = load_samples(dir, {ids[1]}, labels, spec)[0].input;
  for (std::size_t i = 0; i < norm.size(); ++i) EXPECT_FLOAT_EQ(norm[i], (raw[i] - 0.5f) * 2.0f);
  EXPECT_THROW(list_cases(dir / "nope"), DataError);
  EXPECT_THROW(parse_layout("cube"), DataError);
  EXPECT_THROW(parse_modality("T3"), DataError);
}
