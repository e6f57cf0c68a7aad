// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace pointcell {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles. Parameters and network activations are
/// both Tensors; `grad` is populated by Tape::backward for tensors that
/// require gradients.
struct Tensor {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::optional<std::vector<double>> grad;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> values);

  static Tensor zeros(Shape s);
  static Tensor full(Shape s, double value);
  static Tensor scalar(double value);

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t axis) const;

  double item() const;
  void zero_grad();

  /// Shape, data and gradient invariants; throws DimensionError.
  void validate() const;
};

}  // namespace pointcell
