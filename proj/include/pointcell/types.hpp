// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pointcell {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

struct GroundTruthPoint {
  double x = 0.0;
  double y = 0.0;
  int class_id = 0;
  friend bool operator==(const GroundTruthPoint&, const GroundTruthPoint&) = default;
};

/// Ground-truth points of one image in column form: N coordinates and N class ids.
struct GroundTruthSet {
  std::vector<Point2> coords;
  std::vector<int> classes;

  std::size_t size() const { return coords.size(); }
  static GroundTruthSet from_points(const std::vector<GroundTruthPoint>& points);
  /// Throws ValidationError on length mismatch or class ids outside [0, num_classes).
  void validate(std::size_t num_classes) const;
};

/// Decoded anchor predictions: refined coordinates, (background, object)
/// probabilities and a class distribution per proposal.
struct ProposalSet {
  std::vector<Point2> coords;
  std::vector<double> p_bkg;
  std::vector<double> p_obj;
  std::size_t num_classes = 0;
  std::vector<double> class_probs;  // row-major, size() x num_classes

  std::size_t size() const { return coords.size(); }
  std::span<const double> classes(std::size_t i) const {
    return {class_probs.data() + i * num_classes, num_classes};
  }
  /// Row-sum and length invariants within `tol`; throws ValidationError.
  void validate(double tol = 1e-9) const;
};

}  // namespace pointcell
