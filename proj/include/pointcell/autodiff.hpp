// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pointcell/tensor.hpp"

namespace pointcell {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape; }
  std::size_t numel() const { return value().numel(); }
  double item() const { return value().item(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run reverse-mode tape. Nodes are appended in construction order,
/// so every node's inputs precede it and backward walks the list in reverse.
class Tape {
 public:
  /// Receives the gradient of the node's output; adds into input gradients.
  using BackwardFn = std::function<void(Tape&, const std::vector<double>&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// References an external tensor without copying it. When the tensor
  /// requires grad, backward accumulates into `tensor.grad`. The tensor must
  /// outlive the tape and must not be modified while the tape is in use.
  Var leaf(Tensor& tensor);

  /// Appends an op result. Throws NumericError if `value` holds NaN/Inf.
  Var record(const char* op, Tensor value, const std::vector<Var>& inputs, BackwardFn fn);

  const Tensor& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  /// Gradient buffer of a node, zero-allocated on first access.
  std::vector<double>& grad(std::size_t id);
  const char* op(std::size_t id) const { return nodes_.at(id).op; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and propagates in exact reverse order.
  void backward(Var loss);

 private:
  struct Node {
    const char* op = "";
    std::optional<Tensor> owned;
    Tensor* external = nullptr;
    bool requires_grad = false;
    std::vector<double> grad;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

}  // namespace pointcell
