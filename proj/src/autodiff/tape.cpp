#include "fedperi/autodiff/tape.hpp"

#include <string>

#include "fedperi/common/errors.hpp"

namespace fedperi::ad {

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::record(Tensor value, std::vector<std::uint32_t> inputs, BackwardFn backward,
                 const char* op_name) {
  if (!value.all_finite())
    throw DivergenceError(std::string("non-finite value produced by ") + op_name);
  Node node;
  node.value = std::move(value);
  for (std::uint32_t in : inputs) node.requires_grad = node.requires_grad || nodes_[in].requires_grad;
  node.inputs = std::move(inputs);
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Tensor Tape::grad(Var v) const {
  const Node& node = nodes_[v.id()];
  if (node.grad.empty()) return Tensor(node.value.shape());
  return Tensor(node.value.shape(), node.grad);
}

std::span<double> Tape::grad_buffer(std::uint32_t id) {
  Node& node = nodes_[id];
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

void Tape::backward(Var root) {
  if (backward_done_) throw ContractError("backward called twice without zero_grad()");
  if (nodes_.empty()) throw ContractError("backward on an empty tape");
  if (root.value().size() != 1)
    throw ContractError("backward root must be scalar, got shape " + shape_string(root.shape()));
  backward_done_ = true;
  const std::uint32_t top = root.id();
  if (!nodes_[top].requires_grad) return;
  grad_buffer(top)[0] = 1.0;
  for (std::uint32_t i = top + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || node.grad.empty() || !node.backward) continue;
    node.backward(*this, i);
  }
}

void Tape::zero_grad() {
  for (Node& node : nodes_) node.grad.clear();
  backward_done_ = false;
}

bool Tape::topologically_ordered() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    for (std::uint32_t in : nodes_[i].inputs)
      if (in >= i) return false;
  return true;
}

}  // namespace fedperi::ad
