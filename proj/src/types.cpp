// SPDX-License-Identifier: Apache-2.0
#include "pointcell/types.hpp"

#include <cmath>

#include "pointcell/errors.hpp"

namespace pointcell {

GroundTruthSet GroundTruthSet::from_points(const std::vector<GroundTruthPoint>& points) {
  GroundTruthSet gt;
  for (const auto& p : points) {
    gt.coords.push_back({p.x, p.y});
    gt.classes.push_back(p.class_id);
  }
  return gt;
}

void GroundTruthSet::validate(std::size_t num_classes) const {
  if (coords.size() != classes.size())
    throw ValidationError("ground truth has " + std::to_string(coords.size()) +
                          " coordinates but " + std::to_string(classes.size()) + " classes");
  for (int c : classes)
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes)
      throw ValidationError("ground-truth class " + std::to_string(c) + " outside [0, " +
                            std::to_string(num_classes) + ")");
}

void ProposalSet::validate(double tol) const {
  const std::size_t m = coords.size();
  if (p_bkg.size() != m || p_obj.size() != m || class_probs.size() != m * num_classes)
    throw ValidationError("proposal set columns have inconsistent lengths");
  for (std::size_t i = 0; i < m; ++i) {
    if (std::abs(p_bkg[i] + p_obj[i] - 1.0) > tol)
      throw ValidationError("objectness row " + std::to_string(i) + " does not sum to 1");
    double s = 0.0;
    for (double v : classes(i)) s += v;
    if (std::abs(s - 1.0) > tol)
      throw ValidationError("class row " + std::to_string(i) + " does not sum to 1");
  }
}

}  // namespace pointcell
