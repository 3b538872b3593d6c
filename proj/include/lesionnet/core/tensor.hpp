#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lesionnet/core/array.hpp"

namespace lesionnet {

namespace detail {
inline std::uint64_t next_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

template <typename T>
struct TensorNode {
  Array<T> value;
  std::optional<Array<T>> grad;
  bool requires_grad = false;
  std::uint64_t id = detail::next_id();
  std::uint64_t tape_id = 0;  // tape that produced this tensor, 0 for leaves
};

/// Shared handle to a value that may take part in reverse-mode differentiation.
///
/// Copies alias the same node, so a parameter held by a layer and the same
/// parameter seen by an optimizer are one object. Forward ops never modify
/// their inputs; only optimizers and batch-norm running statistics write
/// through `mutable_value()`.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Array<T> value, bool requires_grad = false) : node_(std::make_shared<TensorNode<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  static Tensor parameter(Array<T> value) { return Tensor(std::move(value), true); }
  static Tensor constant(Array<T> value) { return Tensor(std::move(value), false); }

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Array<T>& value() const { return node_->value; }
  Array<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t rank() const { return node_->value.rank(); }
  std::size_t dim(std::size_t i) const { return node_->value.dim(i); }
  std::size_t size() const { return node_->value.size(); }
  T item() const { return node_->value.item(); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) const { node_->requires_grad = on; }

  bool has_grad() const { return node_->grad.has_value(); }
  const Array<T>& grad() const {
    if (!node_->grad) throw TapeError("tensor has no gradient; run backward first");
    return *node_->grad;
  }
  // Handle semantics: writing a gradient does not modify the handle itself.
  Array<T>& mutable_grad() const {
    if (!node_->grad) node_->grad.emplace(shape(), T{0});
    return *node_->grad;
  }
  void clear_grad() const { node_->grad.reset(); }

  std::uint64_t id() const { return node_->id; }
  std::uint64_t tape_id() const { return node_->tape_id; }
  void set_tape_id(std::uint64_t t) const { node_->tape_id = t; }

  friend bool same_node(const Tensor& a, const Tensor& b) { return a.node_ == b.node_; }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

/// Ordered record of primitive ops executed during one forward pass.
///
/// Backward closures read the output gradient and accumulate into the input
/// gradients; replaying them in reverse recording order is a valid
/// topological order because inputs always exist before the op runs.
template <typename T>
class Tape {
 public:
  struct Node {
    std::string op;
    std::vector<Tensor<T>> inputs;
    Tensor<T> output;
    std::function<void()> backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::uint64_t id() const noexcept { return id_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  static bool needs_grad(std::initializer_list<const Tensor<T>*> inputs) {
    for (const auto* t : inputs) {
      if (t && t->defined() && t->requires_grad()) return true;
    }
    return false;
  }

  void record(std::string op, std::vector<Tensor<T>> inputs, Tensor<T>& output, std::function<void()> backward) {
    output.set_requires_grad(true);
    output.set_tape_id(id_);
    nodes_.push_back(Node{std::move(op), std::move(inputs), output, std::move(backward)});
  }

  /// Populates `grad` of every differentiable tensor reachable on this tape.
  ///
  /// Gradients are reset to zero first, so tensors the loss does not depend
  /// on end up with an all-zero gradient rather than a stale one.
  void backward(Tensor<T>& loss) {
    if (loss.size() != 1) throw TapeError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
    if (loss.tape_id() != id_) throw TapeError("loss tensor was not produced on this tape");
    for (auto& node : nodes_) {
      for (auto& in : node.inputs) {
        if (in.requires_grad()) in.mutable_grad().fill(T{0});
      }
      node.output.mutable_grad().fill(T{0});
    }
    loss.mutable_grad().fill(T{1});
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();
  }

  void clear() { nodes_.clear(); }

 private:
  std::uint64_t id_ = detail::next_id();
  std::vector<Node> nodes_;
};

}  // namespace lesionnet
