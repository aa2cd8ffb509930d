#pragma once

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cir/ad/tensor.hpp"

namespace cir::ad {

/// Thrown by primitives on incompatible inputs. The message names the
/// primitive and the offending shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Node;

/// Adjoint rule: receives the output gradient and one slot per parent.
/// Slots of parents that do not require gradients are empty tensors.
using BackwardFn = std::function<void(const Tensor& grad_out, std::span<Tensor> parent_grads)>;

struct Node {
  Tensor value;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
};

/// Handle to a graph node. Leaves created with requires_grad=true act as
/// trainable parameters; everything else is recorded by the primitives.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  /// Mutable access for optimizers and loaders; never use on recorded nodes.
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool valid() const { return node_ != nullptr; }
  const char* op() const { return node_->op; }

  const std::shared_ptr<Node>& node() const { return node_; }

  /// Internal: builds a recorded node. Parents that do not need gradients
  /// are dropped from the record and the result becomes a constant.
  static Var record(Tensor value, const char* op, std::vector<Var> parents, BackwardFn backward);

 private:
  std::shared_ptr<Node> node_;
};

/// While alive on a thread, primitives skip recording so frozen models can
/// run inference concurrently.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool active();

 private:
  bool previous_;
};

/// Gradients of a scalar with respect to every reachable trainable leaf.
class Gradients {
 public:
  /// Gradient for `param`; all zeros when the loss does not depend on it.
  Tensor of(const Var& param) const;
  bool contains(const Var& param) const;

  void set(const Node* leaf, Tensor grad) { grads_[leaf] = std::move(grad); }

 private:
  std::unordered_map<const Node*, Tensor> grads_;
};

/// Exact reverse-mode sweep from a scalar loss. Does not mutate the graph,
/// so calling it twice yields identical results.
Gradients backward(const Var& loss);

}  // namespace cir::ad
