#include "scagan/autograd.hpp"

#include <stdexcept>
#include <unordered_set>

namespace scagan {
namespace {

thread_local bool g_grad_enabled = true;

}  // namespace

void Node::accumulate_grad(const Tensor& g) {
  if (grad.empty()) {
    require_same_shape(value, g, "accumulate_grad");
    grad = g;
  } else {
    grad.add_inplace(g);
  }
}

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor(value.shape());
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Var::grad() const {
  if (!node_) throw std::logic_error("grad() on undefined Var");
  if (node_->grad.empty()) return Tensor(node_->value.shape());
  return node_->grad;
}

void Var::zero_grad() {
  if (node_) node_->grad = Tensor();
}

double Var::item() const {
  if (!node_ || node_->value.size() != 1) {
    throw ShapeError("item() requires a one-element tensor");
  }
  return node_->value[0];
}

Var Var::from_node(std::shared_ptr<Node> node) {
  Var v;
  v.node_ = std::move(node);
  return v;
}

Var make_op(Tensor value, std::vector<Var> inputs, const char* op, std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  bool any = false;
  if (g_grad_enabled) {
    for (const Var& in : inputs) any = any || in.requires_grad();
  }
  if (any) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (Var& in : inputs) node->inputs.push_back(in.node());
    node->backward_fn = std::move(fn);
  }
  return Var::from_node(std::move(node));
}

void backward(const Var& root) {
  if (!root.defined()) throw std::logic_error("backward on undefined Var");
  if (root.value().size() != 1) throw ShapeError("backward root must have one element");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate_grad(Tensor(root.shape(), 1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
  // Interior nodes drop their closures and gradients; leaves keep gradients.
  for (Node* node : order) {
    if (node->backward_fn) {
      node->backward_fn = nullptr;
      node->inputs.clear();
      node->grad = Tensor();
    }
  }
}

Var detach(const Var& v) { return Var(v.value(), false); }

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace scagan
