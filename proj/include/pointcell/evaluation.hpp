// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"
#include "pointcell/types.hpp"

namespace pointcell {

struct Prediction {
  double x = 0.0;
  double y = 0.0;
  double score = 0.0;  // p_obj
  int class_id = 0;    // argmax of the class distribution
};

/// Keeps proposals with p_obj strictly above `threshold`; no suppression.
std::vector<Prediction> extract_predictions(const ProposalSet& proposals, double threshold);

struct MatchedPair {
  std::size_t prediction = 0;
  std::size_t gt = 0;
  double distance = 0.0;
  std::size_t image = 0;
};

struct RadiusMatch {
  std::vector<MatchedPair> pairs;
  std::vector<std::size_t> unmatched_predictions;
  std::vector<std::size_t> unmatched_gt;
};

/// Predictions in descending score order (lower index first on ties) each
/// take the nearest unmatched ground-truth point within `radius` (inclusive).
RadiusMatch greedy_match(const std::vector<Prediction>& preds, const GroundTruthSet& gt,
                         double radius);
/// Optimal one-to-one matching minimizing total distance, restricted to pairs
/// within `radius`.
RadiusMatch hungarian_radius_match(const std::vector<Prediction>& preds, const GroundTruthSet& gt,
                                   double radius);

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  /// Rates with 0/0 taken as 0 and F1 := 0 when P + R = 0.
  static Counts from(std::size_t tp, std::size_t fp, std::size_t fn);
};

struct MacroScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricsReport {
  Counts detection;
  std::vector<Counts> per_class;
  MacroScores classification_macro;
  std::vector<MatchedPair> matched_pairs;
};

/// Detection ignores classes. A matched pair is a TP of class c only when
/// both classes are c; otherwise it is an FP of the predicted class and an
/// FN of the true class. Macro scores average the classes present in the
/// ground truth.
MetricsReport compute_metrics(const RadiusMatch& match, const std::vector<Prediction>& preds,
                              const GroundTruthSet& gt, std::size_t num_classes);

/// Sums counts over images before computing rates.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(std::size_t num_classes);
  void add(const MetricsReport& report, std::size_t image_index);
  MetricsReport finish() const;

 private:
  std::size_t tp_ = 0, fp_ = 0, fn_ = 0;
  std::vector<std::size_t> class_tp_, class_fp_, class_fn_;
  std::vector<MatchedPair> pairs_;
};

nlohmann::json metrics_to_json(const MetricsReport& report);

}  // namespace pointcell
