// SPDX-License-Identifier: Apache-2.0
#include "pointcell/losses.hpp"

#include <algorithm>
#include <cmath>

#include "pointcell/errors.hpp"
#include "pointcell/ops.hpp"

namespace pointcell {
namespace {

Tensor coords_tensor(const std::vector<Point2>& pts) {
  Tensor t = Tensor::zeros({pts.size(), 2});
  for (std::size_t i = 0; i < pts.size(); ++i) {
    t.data[2 * i] = pts[i].x;
    t.data[2 * i + 1] = pts[i].y;
  }
  return t;
}

struct DetachedProposals {
  Tape tape;
  ProposalVars vars;

  explicit DetachedProposals(const ProposalSet& p) {
    const std::size_t m = p.size();
    Tensor obj = Tensor::zeros({m, 2});
    for (std::size_t i = 0; i < m; ++i) {
      obj.data[2 * i] = p.p_bkg[i];
      obj.data[2 * i + 1] = p.p_obj[i];
    }
    vars.coords = tape.constant(coords_tensor(p.coords));
    vars.objectness = tape.constant(std::move(obj));
    vars.class_probs = tape.constant(Tensor({m, p.num_classes}, p.class_probs));
  }
};

}  // namespace

void LossConfig::validate() const {
  if (!(q > 0.0 && q <= 1.0)) throw ValidationError("loss.q must lie in (0, 1]");
  if (alpha < 0) throw ValidationError("loss.alpha must be >= 0");
  if (beta < 0) throw ValidationError("loss.beta must be >= 0");
  if (gamma < 0) throw ValidationError("loss.gamma must be >= 0");
  if (lambda < 0) throw ValidationError("loss.lambda must be >= 0");
}

Var regression_loss(Var coords, const GroundTruthSet& gt, const MatchResult& match, bool squared) {
  Tape& tape = coords.tape();
  if (gt.size() == 0) return tape.constant(Tensor::scalar(0.0));
  if (match.delta.size() != gt.size())
    throw ContractError("regression_loss: match covers " + std::to_string(match.delta.size()) +
                        " of " + std::to_string(gt.size()) + " ground-truth points");
  Var matched = ops::gather_rows(coords, match.delta);
  Var diff = ops::sub(matched, tape.constant(coords_tensor(gt.coords)));
  if (squared)
    return ops::scale(ops::sum(ops::mul(diff, diff)), 1.0 / static_cast<double>(gt.size()));
  return ops::mean(ops::row_l2_norm(diff));
}

Var detection_loss(Var objectness, const MatchResult& match, double beta) {
  Tape& tape = objectness.tape();
  const std::size_t m = objectness.shape()[0];
  if (m == 0) throw ContractError("detection_loss: no proposals");
  std::vector<std::pair<std::size_t, std::size_t>> pos, neg;
  for (auto i : match.delta) pos.emplace_back(i, 1);
  for (auto i : match.negatives) neg.emplace_back(i, 0);
  Var acc = tape.constant(Tensor::scalar(0.0));
  if (!pos.empty()) acc = ops::add(acc, ops::sum(ops::log(ops::pick(objectness, pos))));
  if (!neg.empty())
    acc = ops::add(acc, ops::scale(ops::sum(ops::log(ops::pick(objectness, neg))), beta));
  return ops::scale(acc, -1.0 / static_cast<double>(m));
}

Var gce_l2_loss(Var probs, int label, double q, double gamma) {
  Var row = probs.value().rank() == 1 ? ops::reshape(probs, {1, probs.numel()}) : probs;
  if (row.shape()[0] != 1) throw DimensionError("gce_l2_loss: expected a single probability row");
  if (label < 0 || static_cast<std::size_t>(label) >= row.shape()[1])
    throw ContractError("gce_l2_loss: label outside the class range");
  Var target = ops::pick(row, {{0, static_cast<std::size_t>(label)}});
  Var gce = ops::add_scalar(ops::scale(ops::pow(target, q), -1.0 / q), 1.0 / q);
  return ops::add(gce, ops::scale(ops::l2_norm(row), gamma));
}

double gce_l2_loss(std::span<const double> probs, int label, double q, double gamma) {
  if (!(q > 0.0 && q <= 1.0)) throw ContractError("gce_l2_loss: q must lie in (0, 1]");
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size())
    throw ContractError("gce_l2_loss: label outside the class range");
  double sq = 0.0;
  for (double p : probs) sq += p * p;
  const double target = std::max(probs[static_cast<std::size_t>(label)], ops::kLogFloor);
  return (1.0 - std::pow(target, q)) / q + gamma * std::sqrt(sq);
}

Var classification_loss(Var class_probs, const GroundTruthSet& gt, const MatchResult& match,
                        const LossConfig& config) {
  Tape& tape = class_probs.tape();
  const std::size_t n = gt.size();
  if (n == 0) return tape.constant(Tensor::scalar(0.0));
  if (match.delta.size() != n)
    throw ContractError("classification_loss: match does not cover the ground truth");
  Var rows = ops::gather_rows(class_probs, match.delta);
  std::vector<std::pair<std::size_t, std::size_t>> targets;
  for (std::size_t j = 0; j < n; ++j) targets.emplace_back(j, static_cast<std::size_t>(gt.classes[j]));
  const double q = config.q;
  Var gce = ops::add_scalar(ops::scale(ops::pow(ops::pick(rows, targets), q), -1.0 / q), 1.0 / q);
  Var per_pair = ops::add(gce, ops::scale(ops::row_l2_norm(rows), config.gamma));
  return config.classification_mean ? ops::mean(per_pair) : ops::sum(per_pair);
}

LossBreakdown total_loss(double reg, double det, double cls, const LossConfig& config) {
  if (!std::isfinite(reg)) throw NumericError("regression loss is not finite");
  if (!std::isfinite(det)) throw NumericError("detection loss is not finite");
  if (!std::isfinite(cls)) throw NumericError("classification loss is not finite");
  return {reg, det, cls, config.lambda * reg + det + cls};
}

LossTerms compute_losses(const ProposalVars& proposals, const GroundTruthSet& gt,
                         const MatchResult& match, const LossConfig& config) {
  LossTerms t;
  t.reg = regression_loss(proposals.coords, gt, match, config.regression_squared);
  t.det = detection_loss(proposals.objectness, match, config.beta);
  t.cls = classification_loss(proposals.class_probs, gt, match, config);
  t.values = total_loss(t.reg.item(), t.det.item(), t.cls.item(), config);
  t.total = ops::add(ops::add(ops::scale(t.reg, config.lambda), t.det), t.cls);
  t.values.total = t.total.item();
  return t;
}

double regression_loss(const ProposalSet& proposals, const GroundTruthSet& gt,
                       const MatchResult& match, bool squared) {
  DetachedProposals d(proposals);
  return regression_loss(d.vars.coords, gt, match, squared).item();
}

double detection_loss(const ProposalSet& proposals, const MatchResult& match, double beta) {
  DetachedProposals d(proposals);
  return detection_loss(d.vars.objectness, match, beta).item();
}

double classification_loss(const ProposalSet& proposals, const GroundTruthSet& gt,
                           const MatchResult& match, const LossConfig& config) {
  DetachedProposals d(proposals);
  return classification_loss(d.vars.class_probs, gt, match, config).item();
}

}  // namespace pointcell
