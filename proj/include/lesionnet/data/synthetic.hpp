#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "lesionnet/core/random.hpp"
#include "lesionnet/data/csv.hpp"
#include "lesionnet/data/preprocess.hpp"
#include "lesionnet/data/volume.hpp"

namespace lesionnet {

/// Parameters of the synthetic stand-in dataset.
///
/// Each case is smooth low-frequency noise around a modality-specific base
/// intensity; label-1 cases add a bright 3-D Gaussian blob at a random
/// position. Values are clamped to [0, 255].
struct SyntheticConfig {
  std::size_t n_cases = 40;
  std::uint64_t seed = 0;
  std::size_t depth = 4;
  std::size_t size = 32;
  double blob_amplitude = 120.0;
  double blob_sigma_fraction = 1.0 / 6.0;
  double noise_amplitude = 30.0;
  double fine_noise = 4.0;
};

inline constexpr std::array<double, 4> kModalityBase{80.0, 60.0, 70.0, 100.0};
inline constexpr std::array<double, 4> kModalityBlobGain{1.0, 0.6, 1.2, 0.8};

inline std::string case_id_for(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", index);
  return buf;
}

struct SyntheticCase {
  std::string case_id;
  int label;
  std::array<Array<float>, 4> volumes;  // indexed by Modality
};

/// Balanced labels, deterministic in (seed, index).
inline std::vector<int> synthetic_labels(std::size_t n, std::uint64_t seed) {
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 2);
  Rng rng(mix_seed(seed ^ 0x5eed1abe1ULL));
  for (std::size_t i = n - 1; i > 0; --i) std::swap(labels[i], labels[static_cast<std::size_t>(rng() % (i + 1))]);
  return labels;
}

inline SyntheticCase make_synthetic_case(const SyntheticConfig& cfg, std::size_t index, int label) {
  if (cfg.depth < 1 || cfg.size < 4) throw DataError("synthetic volumes need depth >= 1 and size >= 4");
  Rng rng(mix_seed(cfg.seed * 1000003ULL + index));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> centre(0.3, 0.7);
  const std::size_t d = cfg.depth, s = cfg.size;
  const double fs = static_cast<double>(s);
  const double bz = centre(rng) * static_cast<double>(d - 1), by = centre(rng) * (fs - 1), bx = centre(rng) * (fs - 1);
  const double sigma = cfg.blob_sigma_fraction * fs;
  const double sigma_z = std::max(1.0, static_cast<double>(d));

  SyntheticCase out{case_id_for(index), label, {}};
  for (auto m : kModalities) {
    const auto mi = static_cast<std::size_t>(m);
    Array<float> vol(Shape{d, s, s});
    for (std::size_t z = 0; z < d; ++z) {
      // 4x4 coarse grid upsampled gives the smooth background
      Array<float> coarse(Shape{4, 4});
      for (auto& v : coarse.data()) v = static_cast<float>(unit(rng));
      const auto smooth = resize_bilinear(coarse, s, s);
      for (std::size_t y = 0; y < s; ++y)
        for (std::size_t x = 0; x < s; ++x) {
          double v = kModalityBase[mi] + cfg.noise_amplitude * smooth[y * s + x] + cfg.fine_noise * unit(rng);
          if (label == 1) {
            const double dz = (static_cast<double>(z) - bz) / sigma_z;
            const double dy = (static_cast<double>(y) - by) / sigma, dx = (static_cast<double>(x) - bx) / sigma;
            v += cfg.blob_amplitude * kModalityBlobGain[mi] * std::exp(-0.5 * (dz * dz + dy * dy + dx * dx));
          }
          vol[(z * s + y) * s + x] = static_cast<float>(std::clamp(v, 0.0, 255.0));
        }
    }
    out.volumes[mi] = std::move(vol);
  }
  return out;
}

inline std::filesystem::path volume_path(const std::filesystem::path& root, const std::string& case_id, Modality m) {
  return root / case_id / (to_string(m) + ".mvol");
}

/// Writes <out>/<case_id>/<MODALITY>.mvol for every case plus <out>/labels.csv.
inline std::map<std::string, int> gen_synthetic(const SyntheticConfig& cfg, const std::filesystem::path& out_dir) {
  if (cfg.n_cases < 4) throw DataError("need >= 4 cases, got " + std::to_string(cfg.n_cases));
  std::filesystem::create_directories(out_dir);
  const auto labels = synthetic_labels(cfg.n_cases, cfg.seed);
  std::map<std::string, int> label_map;
  for (std::size_t i = 0; i < cfg.n_cases; ++i) {
    const auto c = make_synthetic_case(cfg, i, labels[i]);
    std::filesystem::create_directories(out_dir / c.case_id);
    for (auto m : kModalities) save_volume(c.volumes[static_cast<std::size_t>(m)], volume_path(out_dir, c.case_id, m).string());
    label_map[c.case_id] = c.label;
  }
  save_labels(label_map, (out_dir / "labels.csv").string());
  return label_map;
}

}  // namespace lesionnet
