// SPDX-License-Identifier: Apache-2.0
#include "pointcell/tensor.hpp"

#include <sstream>

#include "pointcell/errors.hpp"

namespace pointcell {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape s, std::vector<double> values)
    : shape(std::move(s)), data(std::move(values)) {
  validate();
}

Tensor Tensor::zeros(Shape s) { return full(std::move(s), 0.0); }

Tensor Tensor::full(Shape s, double value) {
  Tensor t;
  t.data.assign(shape_numel(s), value);
  t.shape = std::move(s);
  t.validate();
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape.size())
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(shape));
  return shape[axis];
}

double Tensor::item() const {
  if (data.size() != 1)
    throw ContractError("item() on non-scalar tensor of shape " + shape_str(shape));
  return data[0];
}

void Tensor::zero_grad() {
  if (grad)
    std::fill(grad->begin(), grad->end(), 0.0);
  else if (requires_grad)
    grad.emplace(data.size(), 0.0);
}

void Tensor::validate() const {
  if (shape.empty()) throw DimensionError("tensor shape must have rank >= 1");
  for (auto e : shape)
    if (e == 0) throw DimensionError("zero extent in shape " + shape_str(shape));
  if (shape_numel(shape) != data.size())
    throw DimensionError("shape " + shape_str(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  if (grad && grad->size() != data.size())
    throw DimensionError("gradient length does not match tensor data");
}

}  // namespace pointcell
