#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "stockbot/autodiff/tensor.hpp"

namespace stockbot::ad {

enum class OpKind : std::uint8_t {
  leaf,
  constant,
  matmul,
  bmm,
  add,
  sub,
  mul,
  scale,
  add_bias,
  sigmoid,
  tanh,
  relu,
  gelu,
  exp,
  neg,
  softmax,
  reduce_sum,
  reduce_mean,
  layernorm,
  reshape,
  slice,
  concat,
  expand,
  shift,
};

class Tape;

/// Handle to a node recorded on a tape. Cheap to copy; only valid while the
/// owning tape is alive and has not been reset.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(std::size_t axis) const { return value().dim(axis); }
  std::size_t rank() const { return value().rank(); }
};

/// Append-only record of a computation. One training step owns one tape;
/// tapes are not shared between threads.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true) {
    return push(OpKind::leaf, std::move(value), requires_grad, {});
  }

  Var constant(Tensor value) { return push(OpKind::constant, std::move(value), false, {}); }

  /// Records an op result. `backward` is dropped when no input needs a gradient.
  Var record(OpKind kind, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || nodes_[in.id].requires_grad;
    return push(kind, std::move(value), needs, needs ? std::move(backward) : BackwardFn{});
  }

  Var record(OpKind kind, Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || nodes_[in.id].requires_grad;
    return push(kind, std::move(value), needs, needs ? std::move(backward) : BackwardFn{});
  }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  OpKind kind(std::size_t id) const { return nodes_[id].kind; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Gradient buffer for a node, zero-initialised on first touch.
  Tensor& grad_buffer(std::size_t id) {
    auto& node = nodes_[id];
    if (!node.has_grad) {
      node.grad = Tensor(node.value.shape(), 0.0);
      node.has_grad = true;
    }
    return node.grad;
  }

  /// Adjoint of a node after backward(); zeros if the node never received one.
  const Tensor& grad(Var v) { return grad_buffer(v.id); }

  void backward(Var loss) {
    if (backward_done_) {
      throw Error(ErrorKind::contract, "autodiff-core", "backward called twice on the same tape without reset");
    }
    if (loss.tape != this) throw Error(ErrorKind::contract, "autodiff-core", "loss belongs to another tape");
    if (nodes_[loss.id].value.size() != 1) {
      throw Error(ErrorKind::contract, "autodiff-core",
                  "backward needs a scalar loss, got shape " + shape_str(nodes_[loss.id].value.shape()));
    }
    backward_done_ = true;
    grad_buffer(loss.id)[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      auto& node = nodes_[i];
      if (!node.backward || !node.has_grad) continue;
      // The closure may touch grad buffers of earlier nodes only, so this
      // reference stays valid.
      node.backward(*this, node.grad);
    }
  }

  void reset() {
    nodes_.clear();
    backward_done_ = false;
    kink_margin_ = std::numeric_limits<double>::infinity();
  }

  /// Smallest |input| seen by any ReLU on this tape. Finite-difference
  /// checks use it to avoid probing across a kink.
  double kink_margin() const noexcept { return kink_margin_; }
  void note_kink(double distance) noexcept { kink_margin_ = std::min(kink_margin_, distance); }

 private:
  struct Node {
    OpKind kind;
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(OpKind kind, Tensor value, bool requires_grad, BackwardFn backward) {
    nodes_.push_back(Node{kind, std::move(value), Tensor{}, false, requires_grad, std::move(backward)});
    return Var{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
  double kink_margin_ = std::numeric_limits<double>::infinity();
};

inline const Tensor& Var::value() const { return tape->value(id); }

}  // namespace stockbot::ad
