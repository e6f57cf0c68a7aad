// SPDX-License-Identifier: Apache-2.0
#include "pointcell/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pointcell/errors.hpp"

namespace pointcell {

double grad_check_tensor(const std::function<Var(Tape&)>& f, Tensor& target, double epsilon,
                         const std::vector<std::size_t>& coordinates) {
  if (!(epsilon > 0.0 && epsilon <= 1e-2))
    throw ContractError("grad_check: epsilon must lie in (0, 1e-2]");
  std::vector<std::size_t> coords = coordinates;
  if (coords.empty()) {
    coords.resize(target.numel());
    std::iota(coords.begin(), coords.end(), 0);
  }

  const bool saved_flag = target.requires_grad;
  const auto saved_grad = target.grad;
  target.requires_grad = true;
  target.grad.emplace(target.numel(), 0.0);
  std::vector<double> analytic;
  {
    Tape tape;
    Var out = f(tape);
    if (out.numel() != 1)
      throw ContractError("grad_check: function output must be scalar, got " +
                          shape_str(out.shape()));
    tape.backward(out);
    analytic = *target.grad;
  }
  target.requires_grad = false;

  auto eval = [&]() {
    Tape tape;
    return f(tape).item();
  };
  double worst = 0.0;
  for (std::size_t c : coords) {
    if (c >= target.numel()) throw ContractError("grad_check: coordinate out of range");
    const double orig = target.data[c];
    target.data[c] = orig + epsilon;
    const double up = eval();
    target.data[c] = orig - epsilon;
    const double down = eval();
    target.data[c] = orig;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double err = std::abs(analytic[c] - numeric) / std::max(1.0, std::abs(analytic[c]));
    worst = std::max(worst, err);
  }
  target.requires_grad = saved_flag;
  target.grad = saved_grad;
  return worst;
}

double grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double epsilon,
                  const std::vector<std::size_t>& coordinates) {
  Tensor probe = x;
  return grad_check_tensor([&](Tape& t) { return f(t, t.leaf(probe)); }, probe, epsilon,
                           coordinates);
}

}  // namespace pointcell
