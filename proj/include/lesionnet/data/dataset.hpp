#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lesionnet/data/preprocess.hpp"
#include "lesionnet/data/synthetic.hpp"
#include "lesionnet/data/volume.hpp"

namespace lesionnet {

/// A model input together with the case it came from. Several samples may
/// share a case (slice windows); predictions are averaged per case.
template <typename T>
struct Sample {
  std::string case_id;
  Array<T> input;  // [C, spatial...], no batch dim
  int label = -1;
};

/// Windows of `window` adjacent depth slices stacked as channels:
/// [D, H, W] -> (D - window + 1) x [window, H, W].
inline std::vector<Array<float>> extract_slices(const Array<float>& voxels, std::size_t window = 3) {
  if (voxels.rank() != 3) throw ShapeError("extract_slices expects [D, H, W], got " + shape_str(voxels.shape()));
  const std::size_t d = voxels.dim(0), plane = voxels.dim(1) * voxels.dim(2);
  if (window == 0 || d < window) {
    throw DataError("extract_slices needs depth >= " + std::to_string(window) + ", got " + std::to_string(d));
  }
  std::vector<Array<float>> out;
  for (std::size_t z = 0; z + window <= d; ++z) {
    const auto first = voxels.data().begin() + static_cast<std::ptrdiff_t>(z * plane);
    out.emplace_back(Shape{window, voxels.dim(1), voxels.dim(2)},
                     std::vector<float>(first, first + static_cast<std::ptrdiff_t>(window * plane)));
  }
  return out;
}

inline std::vector<Array<float>> extract_slices(const VolumeRecord& rec, std::size_t window = 3) {
  return extract_slices(rec.voxels, window);
}

enum class InputLayout {
  modality_stack,  // middle slice of each modality along depth: [1, 4, S, S]
  volume,          // one modality's full volume: [1, D, S, S]
  slices,          // sliding slice windows of one modality: [window, S, S]
};

inline std::string to_string(InputLayout l) {
  switch (l) {
    case InputLayout::modality_stack: return "stack";
    case InputLayout::volume: return "volume";
    case InputLayout::slices: return "slices";
  }
  return "?";
}

inline InputLayout parse_layout(const std::string& s) {
  if (s == "stack") return InputLayout::modality_stack;
  if (s == "volume") return InputLayout::volume;
  if (s == "slices") return InputLayout::slices;
  throw DataError("unknown input layout '" + s + "' (expected stack, volume or slices)");
}

struct InputSpec {
  InputLayout layout = InputLayout::modality_stack;
  Modality modality = Modality::t1w;
  std::size_t size = 256;
  std::size_t window = 3;
  ChannelNormalization normalization;
};

/// Sorted names of the case directories under `root`.
inline std::vector<std::string> list_cases(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) throw DataError("data directory '" + root.string() + "' does not exist");
  std::vector<std::string> ids;
  for (const auto& e : std::filesystem::directory_iterator(root))
    if (e.is_directory()) ids.push_back(e.path().filename().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

namespace detail {

inline Array<float> preprocess_volume(const Array<float>& voxels, std::size_t size) {
  return rescale(resize_volume(voxels, size, size));
}

inline Array<float> middle_slice(const Array<float>& vol) {
  const std::size_t plane = vol.dim(1) * vol.dim(2), z = vol.dim(0) / 2;
  const auto first = vol.data().begin() + static_cast<std::ptrdiff_t>(z * plane);
  return Array<float>(Shape{vol.dim(1), vol.dim(2)}, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(plane)));
}

}  // namespace detail

/// Loads, resizes to spec.size, rescales by 1/255 and normalizes every case
/// in `ids`. Cases missing from `labels` get label -1.
inline std::vector<Sample<float>> load_samples(const std::filesystem::path& root, const std::vector<std::string>& ids,
                                               const std::map<std::string, int>& labels, const InputSpec& spec) {
  std::vector<Sample<float>> out;
  for (const auto& id : ids) {
    const auto it = labels.find(id);
    const int label = it == labels.end() ? -1 : it->second;
    switch (spec.layout) {
      case InputLayout::modality_stack: {
        Array<float> x(Shape{1, kModalities.size(), spec.size, spec.size});
        const std::size_t plane = spec.size * spec.size;
        for (auto m : kModalities) {
          auto vol = load_volume_voxels(volume_path(root, id, m).string());
          auto slice = rescale(resize_bilinear(detail::middle_slice(vol), spec.size, spec.size));
          std::copy(slice.data().begin(), slice.data().end(),
                    x.data().begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(m) * plane));
        }
        out.push_back({id, spec.normalization.apply(x), label});
        break;
      }
      case InputLayout::volume: {
        auto vol = detail::preprocess_volume(load_volume_voxels(volume_path(root, id, spec.modality).string()), spec.size);
        Shape s{1};
        s.insert(s.end(), vol.shape().begin(), vol.shape().end());
        out.push_back({id, spec.normalization.apply(vol.reshaped(s)), label});
        break;
      }
      case InputLayout::slices: {
        auto vol = detail::preprocess_volume(load_volume_voxels(volume_path(root, id, spec.modality).string()), spec.size);
        for (auto& s : extract_slices(vol, spec.window)) out.push_back({id, spec.normalization.apply(s), label});
        break;
      }
    }
  }
  return out;
}

template <typename T>
std::vector<Sample<T>> cast_samples(const std::vector<Sample<float>>& in) {
  std::vector<Sample<T>> out;
  out.reserve(in.size());
  for (const auto& s : in) out.push_back({s.case_id, s.input.template cast<T>(), s.label});
  return out;
}

}  // namespace lesionnet
