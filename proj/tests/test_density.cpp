// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "pointcell/density.hpp"
#include "pointcell/errors.hpp"
#include "pointcell/grad_check.hpp"
#include "pointcell/ops.hpp"
#include "pointcell/training.hpp"
#include "test_util.hpp"

using namespace pointcell;

namespace {

GroundTruthSet points_at(std::vector<Point2> coords) {
  GroundTruthSet g;
  g.classes.assign(coords.size(), 0);
  g.coords = std::move(coords);
  return g;
}

DensityMap constant_map(std::size_t h, std::size_t w, double v) {
  return DensityMap{h, w, std::vector<double>(h * w, v)};
}

}  // namespace

TEST_CASE("make_rdm: center value, empty set and overlapping kernels") {
  const DensityMap one = make_rdm(points_at({{16, 16}}), 32, 32);
  CHECK(one.at(16, 16) == 1.0);
  CHECK(*std::max_element(one.values.begin(), one.values.end()) == 1.0);
  CHECK(one.at(16, 19) == doctest::Approx(std::exp(-9.0 / 72.0)).epsilon(1e-15));
  CHECK(one.at(16, 20) == 0.0);  // outside the 7x7 support

  const DensityMap none = make_rdm(GroundTruthSet{}, 8, 8);
  CHECK(std::all_of(none.values.begin(), none.values.end(), [](double v) { return v == 0.0; }));

  const DensityMap a = make_rdm(points_at({{10, 10}}), 24, 24);
  const DensityMap b = make_rdm(points_at({{13, 10}}), 24, 24);
  const DensityMap both = make_rdm(points_at({{10, 10}, {13, 10}}), 24, 24);
  for (std::size_t i = 0; i < both.values.size(); ++i)
    CHECK(both.values[i] == std::max(a.values[i], b.values[i]));

  CHECK_THROWS_AS(make_rdm(GroundTruthSet{}, 8, 8, 6, 6.0), ContractError);
}

TEST_CASE("bce_iou_loss: closed-form and limiting values") {
  const DensityMap half = constant_map(4, 4, 0.5);
  CHECK(bce_iou_loss(half, half) == doctest::Approx(0.68785107778128958).epsilon(1e-14));
  CHECK(bce_iou_loss(half, half, 1.0, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  double prev = 1e9;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
    DensityMap p = constant_map(2, 2, eps), t = constant_map(2, 2, eps);
    p.values[0] = t.values[0] = 1.0 - eps;
    const double l = bce_iou_loss(p, t);
    CHECK(l < prev);
    prev = l;
  }
  CHECK(prev < 0.01);
  CHECK_THROWS_AS(bce_iou_loss(half, constant_map(2, 2, 0.5)), DimensionError);
}

TEST_CASE("bce_iou_loss: graph form agrees and has correct gradients") {
  const Tensor target = testing::random_tensor({1, 1, 5, 6}, 12, 0.0, 1.0);
  Tensor logits = testing::random_tensor({1, 1, 5, 6}, 13, -2.0, 2.0);
  DensityMap p{5, 6, {}}, t{5, 6, target.data};
  for (double v : logits.data) p.values.push_back(1.0 / (1.0 + std::exp(-v)));
  Tape tape;
  const Var out = bce_iou_loss(ops::sigmoid(tape.constant(logits)), target);
  CHECK(out.value().data[0] == doctest::Approx(bce_iou_loss(p, t)).epsilon(1e-13));

  auto f = [&](Tape&, Var x) { return bce_iou_loss(ops::sigmoid(x), target); };
  CHECK(grad_check(f, logits, 1e-6) < 1e-6);
}

TEST_CASE("find_peaks: unimodal, separation and empty maps") {
  const DensityMap one = make_rdm(points_at({{12, 9}}), 32, 32);
  const auto p1 = find_peaks(one, {3, 0.5});
  REQUIRE(p1.size() == 1);
  CHECK(p1[0].x == 12.0);
  CHECK(p1[0].y == 9.0);

  DensityMap two = make_rdm(points_at({{10, 16}, {30, 16}}), 32, 48, 7, 6.0);
  two.values[16 * 48 + 30] = 0.9;  // second blob slightly dimmer at its center
  auto p = find_peaks(two, {5, 0.5});
  CHECK(p.size() == 2);
  // A 25 px window covers both centers, so only the brighter survives.
  p = find_peaks(two, {25, 0.5});
  REQUIRE(p.size() == 1);
  CHECK(p[0].x == 10.0);

  CHECK(find_peaks(constant_map(8, 8, 0.0), {3, 0.0}).empty());
  CHECK_THROWS_AS(find_peaks(one, {0, 0.5}), ValidationError);
}

TEST_CASE("density model: output shape, range and initial flatness") {
  BackboneConfig cfg;
  cfg.stage_channels = {8, 8, 8, 8};
  cfg.pfa_channels = 8;
  DensityModel model(cfg, DensityHeadConfig{8}, 1);
  const Tensor img = testing::random_tensor({1, 3, 64, 64}, 3, -1.0, 1.0);
  const DensityMap m = model.predict(img);
  CHECK(m.height == 64);
  CHECK(m.width == 64);
  const auto [lo, hi] = std::minmax_element(m.values.begin(), m.values.end());
  CHECK(*lo >= 0.0);
  CHECK(*hi <= 1.0);
  CHECK(*hi - *lo < 0.5);
  CHECK(model.parameters().contains("density.out.weight"));
}

TEST_CASE("density training: loss falls on a single image") {
  GeneratorConfig gen;
  gen.count = 1;
  gen.seed = 2;
  gen.cell_count_range = {1, 1};
  Dataset ds = generate_dataset(gen);
  ds.train_ids = {ds.images[0].id};
  ds.test_ids = {ds.images[0].id};

  RunConfig cfg;
  cfg.backbone.stage_channels = {8, 16, 16, 16};
  cfg.backbone.pfa_channels = 16;
  cfg.density.head_channels = 16;
  cfg.augment = false;
  cfg.optimizer.lr = 3e-3;
  cfg.epochs = 150;
  const TrainedDensityModel trained = run_density_training(cfg, ds);
  REQUIRE(trained.losses.size() == 150);
  double head = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    head += trained.losses[i];
    tail += trained.losses[140 + i];
  }
  CHECK(tail < 0.7 * head);

  const auto& img = ds.images[0];
  const DensityMap map = trained.model->predict(image_tensor(img.pixels, img.height, img.width));
  const auto peaks = find_peaks(map, {3, 0.3});
  REQUIRE(!peaks.empty());
  CHECK(std::hypot(peaks[0].x - img.points[0].x, peaks[0].y - img.points[0].y) <= 12.0);
}
