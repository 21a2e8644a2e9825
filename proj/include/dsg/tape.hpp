#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dsg/tensor.hpp"

namespace dsg {

/// Trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor2 value;
  Tensor2 grad;

  Parameter() = default;
  Parameter(std::string name, Tensor2 value)
      : name(std::move(name)), value(std::move(value)), grad(this->value.rows(), this->value.cols()) {}

  void zero_grad() { grad = Tensor2(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor2& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Records differentiable operations in execution order and replays their
/// hand-written adjoints in reverse. One forward, one backward; build a new
/// tape for the next step.
class Tape {
 public:
  using Adjoint = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(Tensor2 value);
  /// Leaf bound to `p`. Gradients reach `p.grad` only through flush_gradients().
  Var parameter(Parameter& p);

  /// Appends an op result. `adjoint` propagates grad(self) into its inputs and
  /// is skipped when no input requires a gradient.
  Var record(Tensor2 value, std::vector<std::size_t> inputs, Adjoint adjoint);

  const Tensor2& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor2& grad(std::size_t id) const { return nodes_[id].grad; }
  /// Gradient buffer of `id`, allocated on first use.
  Tensor2& grad_buffer(std::size_t id);
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Seeds d(loss)/d(loss) = 1 and runs every adjoint in reverse order.
  void backward(Var loss);
  bool backward_done() const { return backward_done_; }

  /// Adds leaf gradients into the bound Parameter::grad buffers, in binding order.
  void flush_gradients();
  /// Leaf gradients in binding order without touching the parameters.
  std::vector<std::pair<Parameter*, Tensor2>> parameter_gradients() const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor2 value;
    Tensor2 grad;
    std::vector<std::size_t> inputs;
    Adjoint adjoint;
    Parameter* parameter = nullptr;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::vector<std::size_t> parameter_nodes_;
  bool backward_done_ = false;
};

inline const Tensor2& Var::value() const { return tape->value(id); }

}  // namespace dsg
