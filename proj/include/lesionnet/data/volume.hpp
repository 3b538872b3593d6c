#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "lesionnet/core/array.hpp"
#include "lesionnet/core/binary_io.hpp"

namespace lesionnet {

/// The four mpMRI scan types, in the order ensemble ratios refer to them.
enum class Modality { flair = 0, t1w = 1, t1gd = 2, t2 = 3 };

inline constexpr std::array<Modality, 4> kModalities{Modality::flair, Modality::t1w, Modality::t1gd, Modality::t2};

inline std::string to_string(Modality m) {
  switch (m) {
    case Modality::flair: return "FLAIR";
    case Modality::t1w: return "T1w";
    case Modality::t1gd: return "T1Gd";
    case Modality::t2: return "T2";
  }
  return "?";
}

inline Modality parse_modality(const std::string& s) {
  for (auto m : kModalities)
    if (to_string(m) == s) return m;
  throw DataError("unknown modality '" + s + "' (expected FLAIR, T1w, T1Gd or T2)");
}

struct VolumeRecord {
  std::string case_id;
  Modality modality = Modality::flair;
  Array<float> voxels;  // [depth, H, W]
  std::optional<int> label;
};

// MVOL layout (little-endian):
//   "MVOL" | u16 version=1 | u16 rank=3 | u32 depth | u32 H | u32 W |
//   u8 dtype=1 (f32) | 3 reserved bytes | f32 payload, row-major
inline constexpr std::uint16_t kMvolVersion = 1;
inline constexpr std::uint8_t kMvolFloat32 = 1;
inline constexpr std::size_t kMvolHeaderBytes = 24;

inline void save_volume(const Array<float>& voxels, const std::string& path) {
  if (voxels.rank() != 3) throw DataError("volume must be rank 3 [depth, H, W], got " + shape_str(voxels.shape()));
  binary::Writer w;
  w.put_string("MVOL");
  w.put<std::uint16_t>(kMvolVersion);
  w.put<std::uint16_t>(3);
  for (auto d : voxels.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
  w.put<std::uint8_t>(kMvolFloat32);
  w.put<std::uint8_t>(0);
  w.put<std::uint8_t>(0);
  w.put<std::uint8_t>(0);
  for (float v : voxels.data()) w.put_f32(v);
  w.write_file(path);
}

inline void save_volume(const VolumeRecord& rec, const std::string& path) {
  if (rec.label && *rec.label != 0 && *rec.label != 1) throw DataError("volume label must be 0 or 1");
  save_volume(rec.voxels, path);
}

inline Array<float> load_volume_voxels(const std::string& path) {
  auto r = binary::Reader::from_file(path);
  if (r.remaining() < kMvolHeaderBytes) throw FormatError("truncated MVOL header in '" + path + "'");
  if (r.get_string(4) != "MVOL") throw FormatError("bad magic in '" + path + "': not an MVOL volume");
  const auto version = r.get<std::uint16_t>();
  if (version != kMvolVersion) throw FormatError("unsupported MVOL version " + std::to_string(version) + " in '" + path + "'");
  const auto rank = r.get<std::uint16_t>();
  if (rank != 3) throw FormatError("unsupported MVOL rank " + std::to_string(rank) + " in '" + path + "'");
  Shape shape(3);
  for (auto& d : shape) {
    d = r.get<std::uint32_t>();
    if (d == 0) throw FormatError("zero extent in MVOL header of '" + path + "'");
  }
  const auto dtype = r.get<std::uint8_t>();
  if (dtype != kMvolFloat32) throw FormatError("unsupported MVOL dtype " + std::to_string(dtype) + " in '" + path + "'");
  r.get_string(3);
  const std::size_t n = shape_size(shape);
  if (r.remaining() != n * 4) {
    throw FormatError("MVOL payload of '" + path + "' has " + std::to_string(r.remaining()) + " bytes, header " +
                      shape_str(shape) + " needs " + std::to_string(n * 4));
  }
  std::vector<float> data(n);
  for (auto& v : data) v = r.get_f32();
  return Array<float>(std::move(shape), std::move(data));
}

inline VolumeRecord load_volume(const std::string& path, std::string case_id = {}, Modality modality = Modality::flair,
                                std::optional<int> label = std::nullopt) {
  return VolumeRecord{std::move(case_id), modality, load_volume_voxels(path), label};
}

}  // namespace lesionnet
