#include "dsg/tape.hpp"

#include "dsg/error.hpp"

namespace dsg {

Var Tape::constant(Tensor2 value) {
  if (backward_done_) throw Error("tape: cannot record after backward");
  if (!value.all_finite()) throw NumericError("tape: non-finite constant");
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::parameter(Parameter& p) {
  if (backward_done_) throw Error("tape: cannot record after backward");
  if (!p.value.all_finite()) throw NumericError("tape: parameter '" + p.name + "' is not finite");
  Node n;
  n.value = p.value;
  n.parameter = &p;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  parameter_nodes_.push_back(nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor2 value, std::vector<std::size_t> inputs, Adjoint adjoint) {
  if (backward_done_) throw Error("tape: cannot record after backward");
  if (!value.all_finite()) throw NumericError("tape: op produced a non-finite value");
  Node n;
  n.value = std::move(value);
  for (std::size_t in : inputs) n.requires_grad = n.requires_grad || nodes_.at(in).requires_grad;
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.adjoint = std::move(adjoint);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Tensor2& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor2(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw Error("tape: loss belongs to another tape");
  if (backward_done_) throw Error("tape: backward called twice without a new forward");
  const Tensor2& lv = nodes_[loss.id].value;
  if (lv.rows() != 1 || lv.cols() != 1) throw ShapeError("tape: backward needs a 1x1 loss");
  backward_done_ = true;
  grad_buffer(loss.id)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.adjoint || n.grad.empty()) continue;
    n.adjoint(*this, i);
  }
}

void Tape::flush_gradients() {
  for (std::size_t id : parameter_nodes_) {
    Node& n = nodes_[id];
    if (n.grad.empty()) continue;
    n.parameter->grad += n.grad;
  }
}

std::vector<std::pair<Parameter*, Tensor2>> Tape::parameter_gradients() const {
  std::vector<std::pair<Parameter*, Tensor2>> out;
  out.reserve(parameter_nodes_.size());
  for (std::size_t id : parameter_nodes_) {
    const Node& n = nodes_[id];
    out.emplace_back(n.parameter,
                     n.grad.empty() ? Tensor2(n.value.rows(), n.value.cols()) : n.grad);
  }
  return out;
}

}  // namespace dsg
