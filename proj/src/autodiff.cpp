// SPDX-License-Identifier: Apache-2.0
#include "pointcell/autodiff.hpp"

#include <cmath>

#include "pointcell/errors.hpp"

namespace pointcell {

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("use of an unbound Var");
  return tape_->value(id_);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

Var Tape::constant(Tensor value) {
  value.validate();
  value.requires_grad = false;
  value.grad.reset();
  Node node;
  node.op = "constant";
  node.owned.emplace(std::move(value));
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor& tensor) {
  tensor.validate();
  Node node;
  node.op = "leaf";
  node.external = &tensor;
  node.requires_grad = tensor.requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* op, Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
  for (double v : value.data)
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite output from ") + op);
  Node node;
  node.op = op;
  node.owned = std::move(value);
  for (const auto& in : inputs) {
    if (&in.tape() != this) throw ContractError(std::string(op) + ": input from another tape");
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.external ? *n.external : *n.owned;
}

std::vector<double>& Tape::grad(std::size_t id) {
  Node& n = nodes_.at(id);
  if (n.grad.empty()) n.grad.assign(value(id).numel(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
  if (loss.numel() != 1)
    throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  for (auto& n : nodes_) n.grad.clear();
  grad(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.requires_grad) continue;
    if (n.backward) n.backward(*this, n.grad);
  }
  for (auto& n : nodes_) {
    if (!n.external || !n.requires_grad || n.grad.empty()) continue;
    auto& target = n.external->grad;
    if (!target) target.emplace(n.grad.size(), 0.0);
    for (std::size_t k = 0; k < n.grad.size(); ++k) (*target)[k] += n.grad[k];
  }
}

}  // namespace pointcell
