// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "pointcell/types.hpp"

namespace pointcell {

/// M x N matrix of assignment costs, proposals along rows and ground truth
/// along columns.
struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  double alpha = 0.0;
  std::vector<double> values;  // row-major

  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
};

/// delta[j] is the proposal matched to ground-truth point j; `negatives`
/// lists every proposal outside the image of delta, in increasing order.
struct MatchResult {
  std::vector<std::size_t> delta;
  std::vector<std::size_t> negatives;
  std::size_t num_proposals = 0;

  /// Injectivity and partition invariants; throws ContractError.
  void validate() const;
};

/// E[i][j] = alpha * ||p_i - g_j||_2 - p_obj(i) - p_class(i, c_j).
/// Throws InfeasibleError when M < N.
CostMatrix build_cost_matrix(const ProposalSet& proposals, const GroundTruthSet& gt, double alpha);

/// Minimum-cost injective assignment of columns to rows (Hungarian method with
/// row/column potentials, O(N^2 M)). Among equal reduced costs the lowest row
/// index is taken first, which makes the result deterministic.
MatchResult solve_assignment(const CostMatrix& costs);

/// Sum of costs[delta[j]][j] in column order.
double assignment_cost(const CostMatrix& costs, const MatchResult& match);

MatchResult match(const ProposalSet& proposals, const GroundTruthSet& gt, double alpha);

}  // namespace pointcell
