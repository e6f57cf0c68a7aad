// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "pointcell/parameters.hpp"

namespace pointcell {

struct AdamWOptions {
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment buffers are parallel to the store's parameter order.
struct AdamWState {
  AdamWOptions options;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  static AdamWState init(const ParameterStore& params, const AdamWOptions& options);
};

/// One AdamW update with decoupled weight decay:
///   w <- w - lr*wd*w,  then  w <- w - lr * m_hat / (sqrt(v_hat) + eps).
/// Throws ContractError if any parameter has no gradient.
void adamw_step(ParameterStore& params, AdamWState& state);

}  // namespace pointcell
