// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "pointcell/errors.hpp"
#include "pointcell/grad_check.hpp"
#include "pointcell/losses.hpp"
#include "pointcell/ops.hpp"
#include "test_util.hpp"

using namespace pointcell;
using pointcell::testing::random_tensor;

namespace {

ProposalSet fixed_proposals(std::vector<Point2> coords, std::vector<double> p_obj,
                            std::size_t classes, std::vector<double> class_probs) {
  ProposalSet ps;
  ps.coords = std::move(coords);
  ps.p_obj = p_obj;
  for (double p : p_obj) ps.p_bkg.push_back(1.0 - p);
  ps.num_classes = classes;
  ps.class_probs = std::move(class_probs);
  return ps;
}

MatchResult make_match(std::vector<std::size_t> delta, std::size_t m) {
  MatchResult r;
  r.delta = std::move(delta);
  r.num_proposals = m;
  for (std::size_t i = 0; i < m; ++i)
    if (std::find(r.delta.begin(), r.delta.end(), i) == r.delta.end()) r.negatives.push_back(i);
  return r;
}

GroundTruthSet gt_of(std::vector<Point2> coords, std::vector<int> classes) {
  GroundTruthSet g;
  g.coords = std::move(coords);
  g.classes = std::move(classes);
  return g;
}

}  // namespace

TEST_CASE("regression loss values") {
  const auto ps = fixed_proposals({{3, 4}, {10, 10}, {1, 1}, {7, -2}}, {0.5, 0.5, 0.5, 0.5}, 2,
                                  std::vector<double>(8, 0.5));
  CHECK(regression_loss(ps, gt_of({{3, 4}}, {0}), make_match({0}, 4)) == 0.0);
  CHECK(regression_loss(ps, gt_of({{0, 0}}, {0}), make_match({0}, 4)) == doctest::Approx(5.0));
  // Three pairs: distances 5, hypot(2, 5), hypot(6, 3).
  const GroundTruthSet g = gt_of({{0, 0}, {12, 15}, {7, 4}}, {0, 1, 0});
  const MatchResult r = make_match({0, 1, 2}, 4);
  const double expected = (5.0 + std::hypot(2.0, 5.0) + std::hypot(6.0, 3.0)) / 3.0;
  CHECK(regression_loss(ps, g, r) == doctest::Approx(expected).epsilon(1e-14));
  const double sq = (25.0 + 29.0 + 45.0) / 3.0;
  CHECK(regression_loss(ps, g, r, true) == doctest::Approx(sq).epsilon(1e-14));
  CHECK(regression_loss(ps, GroundTruthSet{}, make_match({}, 4)) == 0.0);
}

TEST_CASE("detection loss values") {
  const auto ps = fixed_proposals({{0, 0}, {1, 1}}, {0.5, 0.5}, 2, {0.5, 0.5, 0.5, 0.5});
  const MatchResult r = make_match({0}, 2);
  CHECK(detection_loss(ps, r, 0.6) == doctest::Approx(0.554517744447956).epsilon(1e-12));
  CHECK(std::fabs(detection_loss(ps, r, 0.6) - 0.554518) < 1e-6);

  const auto perfect = fixed_proposals({{0, 0}, {1, 1}}, {1.0, 0.0}, 2, {0.5, 0.5, 0.5, 0.5});
  CHECK(detection_loss(perfect, r, 0.6) == 0.0);

  // beta = 0: changing negatives has no effect.
  const auto other = fixed_proposals({{0, 0}, {1, 1}}, {0.5, 0.99}, 2, {0.5, 0.5, 0.5, 0.5});
  CHECK(detection_loss(ps, r, 0.0) == detection_loss(other, r, 0.0));
  // Saturated probabilities stay finite thanks to the floor.
  const auto saturated = fixed_proposals({{0, 0}, {1, 1}}, {0.0, 1.0}, 2, {0.5, 0.5, 0.5, 0.5});
  CHECK(std::isfinite(detection_loss(saturated, r, 0.6)));
}

TEST_CASE("gce_l2 values") {
  const std::vector<double> onehot{0.0, 1.0, 0.0};
  CHECK(gce_l2_loss(onehot, 1, 0.4, 0.1) == 0.1);
  const std::vector<double> uniform(4, 0.25);
  CHECK(gce_l2_loss(uniform, 2, 0.4, 0.1) == doctest::Approx(1.1141270562537062).epsilon(1e-14));
  CHECK(std::fabs(gce_l2_loss(uniform, 0, 0.4, 0.1) - 1.114127) < 1e-6);
}

TEST_CASE("gce_l2 limits") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> p(3);
    double s = 0.0;
    for (double& v : p) s += (v = u(rng));
    for (double& v : p) v /= s;
    double norm = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    const double ce = -std::log(p[1]) + 0.1 * norm;
    CHECK(std::fabs(gce_l2_loss(p, 1, 1e-4, 0.1) - ce) / ce < 1e-3);
    CHECK(gce_l2_loss(p, 1, 1.0, 0.1) == (1.0 - p[1]) + 0.1 * norm);
  }
}

TEST_CASE("gce_l2 decreases as the target probability grows") {
  // Off-target mass kept in fixed proportion 1:3.
  double previous = std::numeric_limits<double>::infinity();
  for (double pt = 0.05; pt < 1.0; pt += 0.05) {
    const std::vector<double> p{(1 - pt) * 0.25, pt, (1 - pt) * 0.75};
    const double v = gce_l2_loss(p, 1, 0.4, 0.1);
    CHECK(v < previous);
    previous = v;
  }
}

TEST_CASE("classification loss: sum semantics") {
  const std::vector<double> row{0.2, 0.8};
  const auto ps = fixed_proposals({{0, 0}, {1, 1}, {2, 2}}, {0.5, 0.5, 0.5}, 2,
                                  {0.2, 0.8, 0.2, 0.8, 0.6, 0.4});
  LossConfig cfg;
  CHECK(classification_loss(ps, GroundTruthSet{}, make_match({}, 3), cfg) == 0.0);
  const double single = gce_l2_loss(row, 1, cfg.q, cfg.gamma);
  const GroundTruthSet two = gt_of({{0, 0}, {1, 1}}, {1, 1});
  CHECK(classification_loss(ps, two, make_match({0, 1}, 3), cfg) ==
        doctest::Approx(2.0 * single).epsilon(1e-15));
  const GroundTruthSet three = gt_of({{0, 0}, {1, 1}, {2, 2}}, {0, 1, 0});
  const std::vector<double> r2{0.6, 0.4};
  const double expected = gce_l2_loss(row, 0, cfg.q, cfg.gamma) +
                          gce_l2_loss(row, 1, cfg.q, cfg.gamma) +
                          gce_l2_loss(r2, 0, cfg.q, cfg.gamma);
  CHECK(classification_loss(ps, three, make_match({0, 1, 2}, 3), cfg) ==
        doctest::Approx(expected).epsilon(1e-14));
  cfg.classification_mean = true;
  CHECK(classification_loss(ps, three, make_match({0, 1, 2}, 3), cfg) ==
        doctest::Approx(expected / 3.0).epsilon(1e-14));
}

TEST_CASE("total loss composition") {
  LossConfig cfg;
  const LossBreakdown b = total_loss(5.0, 0.5, 1.0, cfg);
  CHECK(b.total == doctest::Approx(1.51).epsilon(1e-15));
  cfg.lambda = 0.0;
  CHECK(total_loss(5.0, 0.5, 1.0, cfg).total == total_loss(500.0, 0.5, 1.0, cfg).total);
  try {
    total_loss(1.0, std::nan(""), 1.0, cfg);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("det") != std::string::npos);
  }
}

TEST_CASE("loss config validation") {
  LossConfig cfg;
  cfg.q = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.q = 1.2;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.q = 1.0;
  CHECK_NOTHROW(cfg.validate());
  cfg.beta = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("losses are non-negative on valid inputs (property)") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LossConfig cfg;
  for (int t = 0; t < 200; ++t) {
    const std::size_t m = 5;
    std::vector<Point2> coords;
    std::vector<double> obj, cls;
    for (std::size_t i = 0; i < m; ++i) {
      coords.push_back({64 * u(rng), 64 * u(rng)});
      obj.push_back(u(rng));
      const double a = u(rng);
      cls.push_back(a);
      cls.push_back(1.0 - a);
    }
    const auto ps = fixed_proposals(coords, obj, 2, cls);
    const GroundTruthSet g = gt_of({{10, 10}, {30, 40}}, {0, 1});
    const MatchResult r = match(ps, g, cfg.alpha);
    CHECK(regression_loss(ps, g, r) >= 0.0);
    CHECK(detection_loss(ps, r, cfg.beta) >= 0.0);
    CHECK(classification_loss(ps, g, r, cfg) >= 0.0);
  }
}

TEST_CASE("Var losses match detached values and grad-check") {
  // Proposals built from raw tensors on a tape: coords, objectness logits, class logits.
  const std::size_t m = 6, c = 3;
  Tensor coords = random_tensor({m, 2}, 31, 0.0, 64.0);
  Tensor obj_logits = random_tensor({m, 2}, 32, -2.0, 2.0);
  Tensor cls_logits = random_tensor({m, c}, 33, -2.0, 2.0);
  const GroundTruthSet g = gt_of({{12, 20}, {40, 8}, {50, 50}}, {0, 2, 1});
  LossConfig cfg;

  auto build = [](Tape&, Var xy, Var ol, Var cl) {
    return ProposalVars{xy, ops::softmax(ol, 1), ops::softmax(cl, 1)};
  };
  Tape t0;
  const ProposalVars pv0 = build(t0, t0.constant(coords), t0.constant(obj_logits),
                                 t0.constant(cls_logits));
  const ProposalSet detached = to_proposal_set(pv0);
  const MatchResult r = match(detached, g, cfg.alpha);
  const LossTerms terms = compute_losses(pv0, g, r, cfg);
  CHECK(terms.values.reg == doctest::Approx(regression_loss(detached, g, r)).epsilon(1e-14));
  CHECK(terms.values.det == doctest::Approx(detection_loss(detached, r, cfg.beta)).epsilon(1e-14));
  CHECK(terms.values.cls ==
        doctest::Approx(classification_loss(detached, g, r, cfg)).epsilon(1e-14));
  CHECK(terms.values.total == doctest::Approx(cfg.lambda * terms.values.reg + terms.values.det +
                                              terms.values.cls)
                                  .epsilon(1e-15));

  const double eps = 1e-6, tol = 1e-5;
  auto reg = [&](Tape&, Var xy) {
    return regression_loss(xy, g, r);
  };
  CHECK(grad_check(reg, coords, eps) < tol);
  auto reg_sq = [&](Tape&, Var xy) { return regression_loss(xy, g, r, true); };
  CHECK(grad_check(reg_sq, coords, eps) < tol);
  auto det = [&](Tape&, Var ol) { return detection_loss(ops::softmax(ol, 1), r, cfg.beta); };
  CHECK(grad_check(det, obj_logits, eps) < tol);
  auto cls = [&](Tape&, Var cl) { return classification_loss(ops::softmax(cl, 1), g, r, cfg); };
  CHECK(grad_check(cls, cls_logits, eps) < tol);
  auto gce = [&](Tape&, Var cl) {
    return gce_l2_loss(ops::gather_rows(ops::softmax(cl, 1), {2}), 1, cfg.q, cfg.gamma);
  };
  CHECK(grad_check(gce, cls_logits, 1e-5) < tol);
  auto total_wrt_coords = [&](Tape& t, Var xy) {
    return compute_losses(build(t, xy, t.constant(obj_logits), t.constant(cls_logits)), g, r, cfg)
        .total;
  };
  CHECK(grad_check(total_wrt_coords, coords, eps) < tol);
  auto total_wrt_cls = [&](Tape& t, Var cl) {
    return compute_losses(build(t, t.constant(coords), t.constant(obj_logits), cl), g, r, cfg).total;
  };
  CHECK(grad_check(total_wrt_cls, cls_logits, eps) < tol);
}
