#pragma once

// Reverse-mode automatic differentiation over Tensor values.
//
// A Var is a shared handle to a graph node. Ops record their inputs and a
// backward closure only when grad mode is on and at least one input requires
// a gradient; everything else produces detached leaves.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "scagan/tensor.hpp"

namespace scagan {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows in
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  void accumulate_grad(const Tensor& g);
  Tensor& grad_buffer();  // allocates zeros on first use
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  int dim(int axis) const { return node_->value.dim(axis); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const noexcept { return static_cast<bool>(node_); }

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  /// Gradient; a zero tensor of the value's shape if nothing has flowed in.
  Tensor grad() const;
  void zero_grad();

  /// The scalar value of a one-element Var.
  double item() const;

  const std::shared_ptr<Node>& node() const noexcept { return node_; }

  static Var from_node(std::shared_ptr<Node> node);

 private:
  std::shared_ptr<Node> node_;
};

/// Builds an op output. `fn` receives the output node; it reads node.grad and
/// accumulates into node.inputs[i] when that input requires a gradient.
Var make_op(Tensor value, std::vector<Var> inputs, const char* op, std::function<void(Node&)> fn);

/// Runs backpropagation from a one-element root, seeding its gradient with 1.
/// The traversed graph is released afterwards.
void backward(const Var& root);

Var detach(const Var& v);

bool grad_enabled() noexcept;

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace scagan
