// SPDX-License-Identifier: Apache-2.0
#include "pointcell/matching.hpp"

#include <cmath>
#include <limits>

#include "pointcell/errors.hpp"

namespace pointcell {

void MatchResult::validate() const {
  std::vector<int> seen(num_proposals, 0);
  for (auto i : delta) {
    if (i >= num_proposals) throw ContractError("match maps to proposal outside range");
    if (seen[i]++) throw ContractError("match is not injective at proposal " + std::to_string(i));
  }
  for (auto i : negatives) {
    if (i >= num_proposals) throw ContractError("negative proposal outside range");
    if (seen[i]++) throw ContractError("proposal " + std::to_string(i) + " is both matched and negative");
  }
  if (delta.size() + negatives.size() != num_proposals)
    throw ContractError("matched and negative proposals do not partition the proposal set");
}

CostMatrix build_cost_matrix(const ProposalSet& proposals, const GroundTruthSet& gt, double alpha) {
  const std::size_t m = proposals.size(), n = gt.size();
  if (m < n)
    throw InfeasibleError("cannot match " + std::to_string(n) + " ground-truth points with only " +
                          std::to_string(m) + " proposals (M=" + std::to_string(m) +
                          " < N=" + std::to_string(n) + ")");
  if (alpha < 0) throw ContractError("alpha must be non-negative");
  gt.validate(proposals.num_classes);
  CostMatrix e;
  e.rows = m;
  e.cols = n;
  e.alpha = alpha;
  e.values.resize(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const auto probs = proposals.classes(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double dist = std::hypot(proposals.coords[i].x - gt.coords[j].x,
                                     proposals.coords[i].y - gt.coords[j].y);
      e.at(i, j) = alpha * dist - proposals.p_obj[i] - probs[static_cast<std::size_t>(gt.classes[j])];
    }
  }
  return e;
}

MatchResult solve_assignment(const CostMatrix& costs) {
  const std::size_t m = costs.rows, n = costs.cols;
  if (costs.values.size() != m * n) throw DimensionError("cost matrix size mismatch");
  if (m < n)
    throw InfeasibleError("assignment needs M >= N, got M=" + std::to_string(m) +
                          ", N=" + std::to_string(n));
  for (double v : costs.values)
    if (!std::isfinite(v)) throw NumericError("cost matrix holds a non-finite entry");

  MatchResult result;
  result.num_proposals = m;
  if (n > 0) {
    // Ground-truth columns are the "workers" (1..n), proposals the "jobs"
    // (1..m); index 0 is the virtual start of each augmenting path.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<std::size_t> owner(m + 1, 0), way(m + 1, 0);
    for (std::size_t w = 1; w <= n; ++w) {
      owner[0] = w;
      std::size_t j0 = 0;
      std::vector<double> minv(m + 1, inf);
      std::vector<char> used(m + 1, 0);
      do {
        used[j0] = 1;
        const std::size_t w0 = owner[j0];
        double delta = inf;
        std::size_t j1 = 0;
        for (std::size_t j = 1; j <= m; ++j) {
          if (used[j]) continue;
          const double cur = costs.at(j - 1, w0 - 1) - u[w0] - v[j];
          if (cur < minv[j]) {
            minv[j] = cur;
            way[j] = j0;
          }
          if (minv[j] < delta) {
            delta = minv[j];
            j1 = j;
          }
        }
        for (std::size_t j = 0; j <= m; ++j) {
          if (used[j]) {
            u[owner[j]] += delta;
            v[j] -= delta;
          } else {
            minv[j] -= delta;
          }
        }
        j0 = j1;
      } while (owner[j0] != 0);
      do {
        const std::size_t j1 = way[j0];
        owner[j0] = owner[j1];
        j0 = j1;
      } while (j0 != 0);
    }
    result.delta.assign(n, 0);
    for (std::size_t j = 1; j <= m; ++j)
      if (owner[j] != 0) result.delta[owner[j] - 1] = j - 1;
  }
  std::vector<char> matched(m, 0);
  for (auto i : result.delta) matched[i] = 1;
  for (std::size_t i = 0; i < m; ++i)
    if (!matched[i]) result.negatives.push_back(i);
  return result;
}

double assignment_cost(const CostMatrix& costs, const MatchResult& match) {
  double total = 0.0;
  for (std::size_t j = 0; j < match.delta.size(); ++j) total += costs.at(match.delta[j], j);
  return total;
}

MatchResult match(const ProposalSet& proposals, const GroundTruthSet& gt, double alpha) {
  return solve_assignment(build_cost_matrix(proposals, gt, alpha));
}

}  // namespace pointcell
