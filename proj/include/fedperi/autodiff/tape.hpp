#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fedperi/autodiff/tensor.hpp"

namespace fedperi::ad {

class Tape;

// Handle to a node on a Tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so inputs always
// precede their consumers; backward walks the nodes in exact reverse order,
// which makes gradients bit-reproducible.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::uint32_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Appends an op output. Throws DivergenceError if the value is not finite.
  Var record(Tensor value, std::vector<std::uint32_t> inputs, BackwardFn backward,
             const char* op_name);

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  const Tensor& value(std::uint32_t id) const { return nodes_[id].value; }
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  bool requires_grad(Var v) const { return requires_grad(v.id()); }

  // Gradient of the last backward() root w.r.t. v; zeros when v was not reached.
  Tensor grad(Var v) const;

  // Used by op implementations during backward.
  std::span<const double> output_grad(std::uint32_t id) const { return nodes_[id].grad; }
  // Zero-initialised on first access.
  std::span<double> grad_buffer(std::uint32_t id);

  // Runs reverse-mode accumulation from a scalar root. A second call without
  // zero_grad() is a contract error.
  void backward(Var root);
  void zero_grad();

  std::size_t size() const { return nodes_.size(); }
  bool topologically_ordered() const;

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    std::vector<std::uint32_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }

}  // namespace fedperi::ad
