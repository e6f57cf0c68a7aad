// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "pointcell/autodiff.hpp"
#include "pointcell/backbone.hpp"
#include "pointcell/matching.hpp"
#include "pointcell/types.hpp"

namespace pointcell {

struct LossConfig {
  double alpha = 0.05;   // distance weight in the matching cost
  double beta = 0.6;     // weight of the negative-proposal detection term
  double gamma = 0.1;    // L2 penalty on class probability vectors
  double q = 0.4;        // GCE exponent
  double lambda = 2e-3;  // regression weight in the total
  /// Mean of squared distances instead of mean Euclidean distance.
  bool regression_squared = false;
  /// Mean instead of sum over matched pairs in the classification loss.
  bool classification_mean = false;

  void validate() const;
};

struct LossBreakdown {
  double reg = 0.0;
  double det = 0.0;
  double cls = 0.0;
  double total = 0.0;
};

/// Mean Euclidean distance between matched proposals and their ground truth.
/// With N = 0 the result is a constant zero outside the gradient graph.
Var regression_loss(Var coords, const GroundTruthSet& gt, const MatchResult& match,
                    bool squared = false);
/// -(1/M) (sum_{matched} log p_obj + beta * sum_{negatives} log p_bkg),
/// log arguments floored at 1e-12.
Var detection_loss(Var objectness, const MatchResult& match, double beta);
/// Sum (or mean) over matched pairs of the GCE+L2 loss.
Var classification_loss(Var class_probs, const GroundTruthSet& gt, const MatchResult& match,
                        const LossConfig& config);

/// (1 - p_label^q) / q + gamma * ||p||_2, with p_label floored at 1e-12.
double gce_l2_loss(std::span<const double> probs, int label, double q, double gamma);
/// Graph form for a 1 x C (or length-C) probability row.
Var gce_l2_loss(Var probs, int label, double q, double gamma);

/// total = lambda * reg + det + cls. Throws NumericError naming the first
/// non-finite component.
LossBreakdown total_loss(double reg, double det, double cls, const LossConfig& config);

struct LossTerms {
  Var reg;
  Var det;
  Var cls;
  Var total;
  LossBreakdown values;
};

/// All four terms for one image, composed on the proposals' tape.
LossTerms compute_losses(const ProposalVars& proposals, const GroundTruthSet& gt,
                         const MatchResult& match, const LossConfig& config);

// Detached conveniences over plain proposal values.
double regression_loss(const ProposalSet& proposals, const GroundTruthSet& gt,
                       const MatchResult& match, bool squared = false);
double detection_loss(const ProposalSet& proposals, const MatchResult& match, double beta);
double classification_loss(const ProposalSet& proposals, const GroundTruthSet& gt,
                           const MatchResult& match, const LossConfig& config);

}  // namespace pointcell
