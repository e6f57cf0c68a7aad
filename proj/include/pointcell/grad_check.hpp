// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "pointcell/autodiff.hpp"

namespace pointcell {

/// Max over checked coordinates of |analytic - central difference| /
/// max(1, |analytic|). `coordinates` restricts the check to a subset
/// (all coordinates when empty). Throws ContractError if `f` is not scalar
/// or epsilon is outside (0, 1e-2].
double grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double epsilon,
                  const std::vector<std::size_t>& coordinates = {});

/// Same check against a tensor that `f` reaches by reference (for example a
/// model parameter). The tensor's values are restored before returning.
double grad_check_tensor(const std::function<Var(Tape&)>& f, Tensor& target, double epsilon,
                         const std::vector<std::size_t>& coordinates = {});

}  // namespace pointcell
