#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "lesionnet/core/tensor.hpp"

namespace lesionnet {

enum class Mode { train, infer };

/// Observed (layer name, output shape) pairs, filled during a forward pass.
using ShapeLog = std::vector<std::pair<std::string, Shape>>;

/// Per-forward-pass settings threaded through every layer.
template <typename T>
struct Context {
  Tape<T>* tape = nullptr;
  Mode mode = Mode::infer;
  ShapeLog* shapes = nullptr;

  void log(const std::string& name, const Shape& s) const {
    if (shapes) shapes->emplace_back(name, s);
  }
};

/// Named registry of a model's tensors in construction order.
///
/// Learnable entries are parameters; the rest are buffers such as
/// batch-norm running statistics. Both are serialized, only parameters are
/// counted and optimized.
template <typename T>
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
    bool learnable;
  };

  Tensor<T> add_parameter(const std::string& name, Array<T> init) { return add(name, std::move(init), true); }
  Tensor<T> add_buffer(const std::string& name, Array<T> init) { return add(name, std::move(init), false); }

  const std::vector<Entry>& entries() const noexcept { return entries_; }

  std::vector<Entry> parameters() const {
    std::vector<Entry> out;
    for (const auto& e : entries_)
      if (e.learnable) out.push_back(e);
    return out;
  }

  const Entry* find(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return &e;
    return nullptr;
  }

  Tensor<T> at(const std::string& name) const {
    if (const auto* e = find(name)) return e->tensor;
    throw Error("no tensor named '" + name + "'");
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_)
      if (e.learnable) n += e.tensor.size();
    return n;
  }

  /// Deep copy of every value, used for best-weight snapshots.
  std::vector<Array<T>> snapshot() const {
    std::vector<Array<T>> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.tensor.value());
    return out;
  }

  void restore(const std::vector<Array<T>>& values) {
    if (values.size() != entries_.size()) throw Error("snapshot size does not match parameter set");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (values[i].shape() != entries_[i].tensor.shape()) {
        throw ShapeError("snapshot shape mismatch for '" + entries_[i].name + "'");
      }
      entries_[i].tensor.mutable_value() = values[i];
    }
  }

 private:
  Tensor<T> add(const std::string& name, Array<T> init, bool learnable) {
    if (find(name)) throw Error("duplicate parameter name '" + name + "'");
    Tensor<T> t(std::move(init), learnable);
    entries_.push_back(Entry{name, t, learnable});
    return t;
  }

  std::vector<Entry> entries_;
};

}  // namespace lesionnet
