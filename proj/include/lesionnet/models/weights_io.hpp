#pragma once

#include <cstdint>
#include <limits>
#include <string>

#include "lesionnet/core/binary_io.hpp"
#include "lesionnet/core/module.hpp"

namespace lesionnet {

// LNWT layout, all integers little-endian:
//   "LNWT" | u16 version | u32 count |
//   count x ( u16 name_len | name | u8 rank | u32 extent x rank | f32 x size )
inline constexpr char kWeightMagic[4] = {'L', 'N', 'W', 'T'};
inline constexpr std::uint16_t kWeightVersion = 1;

/// Writes every parameter and buffer of `ps` in registration order.
template <typename T>
void save_weights(const ParameterSet<T>& ps, const std::string& path) {
  binary::Writer w;
  w.put_bytes(kWeightMagic, 4);
  w.put<std::uint16_t>(kWeightVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ps.entries().size()));
  for (const auto& e : ps.entries()) {
    if (e.name.size() > std::numeric_limits<std::uint16_t>::max()) throw FormatError("parameter name too long: " + e.name);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(e.name.size()));
    w.put_string(e.name);
    const auto& shape = e.tensor.shape();
    w.put<std::uint8_t>(static_cast<std::uint8_t>(shape.size()));
    for (auto d : shape) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (T v : e.tensor.value().data()) w.put_f32(static_cast<float>(v));
  }
  w.write_file(path);
}

/// Loads into an already-built parameter set, which must match the file
/// entry-for-entry in name and shape.
template <typename T>
void load_weights(ParameterSet<T>& ps, const std::string& path) {
  auto r = binary::Reader::from_file(path);
  const std::string magic = r.get_string(4);
  if (magic == "TWNL") throw FormatError("'" + path + "' is a big-endian weight file, which is unsupported");
  if (magic != std::string(kWeightMagic, 4)) throw FormatError("'" + path + "' is not a weight file (bad magic)");
  const auto version = r.get<std::uint16_t>();
  if (version == 0x0100) throw FormatError("'" + path + "' has a byte-swapped version field (unsupported endianness)");
  if (version != kWeightVersion) throw FormatError("unsupported weight file version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  const auto& entries = ps.entries();
  std::vector<Array<T>> values;
  values.reserve(entries.size());
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint16_t>();
    const std::string name = r.get_string(name_len);
    if (i >= entries.size()) {
      throw FormatError("weight file has extra parameter '" + name + "' (model has " + std::to_string(entries.size()) + ")");
    }
    if (name != entries[i].name) {
      throw FormatError("parameter " + std::to_string(i) + " name mismatch: file has '" + name + "', model has '" +
                        entries[i].name + "'");
    }
    const auto rank = r.get<std::uint8_t>();
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint32_t>();
    if (shape != entries[i].tensor.shape()) {
      throw FormatError("parameter '" + name + "' shape mismatch: file " + shape_str(shape) + ", model " +
                        shape_str(entries[i].tensor.shape()));
    }
    std::vector<T> data(shape_size(shape));
    for (auto& v : data) v = static_cast<T>(r.get_f32());
    values.emplace_back(shape, std::move(data));
  }
  if (count != entries.size()) {
    throw FormatError("weight file has " + std::to_string(count) + " parameters, model expects " +
                      std::to_string(entries.size()) + "; first missing is '" + entries[count].name + "'");
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after last parameter in '" + path + "'");
  ps.restore(values);
}

}  // namespace lesionnet
