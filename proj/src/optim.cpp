// SPDX-License-Identifier: Apache-2.0
#include "pointcell/optim.hpp"

#include <cmath>

#include "pointcell/errors.hpp"

namespace pointcell {

AdamWState AdamWState::init(const ParameterStore& params, const AdamWOptions& options) {
  AdamWState s;
  s.options = options;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.tensor.numel(), 0.0);
    s.second_moment.emplace_back(p.tensor.numel(), 0.0);
  }
  return s;
}

void adamw_step(ParameterStore& params, AdamWState& state) {
  if (state.first_moment.size() != params.size())
    throw ContractError("adamw_step: optimizer state does not match parameter set");
  for (const auto& p : params)
    if (!p.tensor.grad) throw ContractError("adamw_step: parameter '" + p.name + "' has no gradient");

  const auto& o = state.options;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(o.beta1, t);
  const double bc2 = 1.0 - std::pow(o.beta2, t);

  std::size_t idx = 0;
  for (auto& p : params) {
    auto& w = p.tensor.data;
    const auto& g = *p.tensor.grad;
    auto& m = state.first_moment[idx];
    auto& v = state.second_moment[idx];
    if (m.size() != w.size())
      throw ContractError("adamw_step: moment size mismatch for '" + p.name + "'");
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] -= o.lr * o.weight_decay * w[i];
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      w[i] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
    ++idx;
  }
}

}  // namespace pointcell
