// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "pointcell/dataset.hpp"
#include "pointcell/errors.hpp"
#include "pointcell/image_io.hpp"
#include "pointcell/synthetic.hpp"

using namespace pointcell;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pointcell_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

AnnotatedImage gradient_image(std::size_t h, std::size_t w) {
  AnnotatedImage img;
  img.id = "g";
  img.height = h;
  img.width = w;
  img.pixels.resize(h * w * 3);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        img.pixels[(y * w + x) * 3 + c] = static_cast<float>((x + 2 * y + c) % 17) / 16.0f;
  return img;
}

}  // namespace

TEST_CASE("generate_image: determinism and invariants") {
  GeneratorConfig cfg;
  cfg.seed = 11;
  const AnnotatedImage a = generate_image(cfg, 3);
  const AnnotatedImage b = generate_image(cfg, 3);
  CHECK(a.pixels == b.pixels);
  CHECK(a.points == b.points);
  CHECK(generate_image(cfg, 4).pixels != a.pixels);
  CHECK(a.points.size() >= 3);
  CHECK(a.points.size() <= 8);
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].x >= 0.0);
    CHECK(a.points[i].x <= 63.0);
    CHECK(a.points[i].class_id >= 0);
    CHECK(a.points[i].class_id < 2);
    for (std::size_t j = i + 1; j < a.points.size(); ++j)
      CHECK(std::hypot(a.points[i].x - a.points[j].x, a.points[i].y - a.points[j].y) >= 14.0);
  }
  for (float v : a.pixels) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("generate_image: empty and infeasible scenes") {
  GeneratorConfig cfg;
  cfg.cell_count_range = {0, 0};
  CHECK(generate_image(cfg, 0).points.empty());
  cfg.cell_count_range = {2, 2};
  cfg.min_separation = 100.0;
  CHECK_THROWS_AS(generate_image(cfg, 0), DensityInfeasibleError);
}

TEST_CASE("inject_label_noise: zero rate, high rate and symmetry") {
  std::vector<GroundTruthPoint> pts;
  for (int i = 0; i < 2000; ++i) pts.push_back({1.0, 2.0, i % 2});
  CHECK(inject_label_noise(pts, 0.0, 2, 5) == pts);
  const auto flipped = inject_label_noise(pts, 0.999, 2, 5);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) changed += flipped[i].class_id != pts[i].class_id;
  CHECK(changed >= 1990);  // binomial mean 1998, sd 1.4
  const auto mid = inject_label_noise(pts, 0.2, 4, 9);
  changed = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(mid[i].x == pts[i].x);
    CHECK(mid[i].class_id >= 0);
    CHECK(mid[i].class_id < 4);
    changed += mid[i].class_id != pts[i].class_id;
  }
  CHECK(changed > 320);  // mean 400, sd 18
  CHECK(changed < 480);
  CHECK_THROWS_AS(inject_label_noise(pts, 1.0, 2, 0), ContractError);
}

TEST_CASE("augmentation: identity, flips and crop mapping") {
  AnnotatedImage img = gradient_image(32, 40);
  img.points = {{5.0, 7.0, 0}, {25.0, 15.0, 1}, {39.0, 31.0, 0}};

  AugmentationParams id{0.0, 0.0, 40.0, 32.0, false, false};
  const AnnotatedImage same = apply_augmentation(img, id, 32, 40);
  CHECK(same.pixels == img.pixels);
  CHECK(same.points == img.points);

  AugmentationParams hflip = id;
  hflip.flip_h = true;
  const AnnotatedImage h = apply_augmentation(img, hflip, 32, 40);
  REQUIRE(h.points.size() == 3);
  CHECK(h.points[0].x == 39.0 - 5.0);
  CHECK(h.points[0].y == 7.0);
  CHECK(h.pixels[(7 * 40 + (39 - 5)) * 3] == img.pixels[(7 * 40 + 5) * 3]);

  // Half-area window with output at window size: pure translation.
  AugmentationParams crop{10.0, 8.0, 20.0, 16.0, false, false};
  const AnnotatedImage c = apply_augmentation(img, crop, 16, 20);
  REQUIRE(c.points.size() == 1);
  CHECK(c.points[0].x == doctest::Approx(15.0).epsilon(1e-12));
  CHECK(c.points[0].y == doctest::Approx(7.0).epsilon(1e-12));
  CHECK(c.pixels[(7 * 20 + 15) * 3] == img.pixels[(15 * 40 + 25) * 3]);
  CHECK(c.points[0].class_id == 1);
}

TEST_CASE("augmentation never creates points and keeps them in bounds (property)") {
  GeneratorConfig cfg;
  cfg.seed = 3;
  AugmentationConfig aug;
  for (std::size_t i = 0; i < 40; ++i) {
    const AnnotatedImage img = generate_image(cfg, i);
    const AnnotatedImage out = augment(img, aug, derive_seed(99, i));
    CHECK(out.points.size() <= img.points.size());
    CHECK(out.height == img.height);
    for (const auto& p : out.points) {
      CHECK(p.x >= 0.0);
      CHECK(p.x <= static_cast<double>(out.width - 1));
      CHECK(p.y >= 0.0);
      CHECK(p.y <= static_cast<double>(out.height - 1));
    }
    CHECK(augment(img, aug, derive_seed(99, i)).pixels == out.pixels);
  }
  aug.crop_scale_range = {0.0, 1.0};
  CHECK_THROWS_AS(aug.validate(), ValidationError);
}

TEST_CASE("pad_to_multiple replicates the border") {
  AnnotatedImage img = gradient_image(30, 33);
  img.points = {{3.0, 4.0, 1}};
  const AnnotatedImage p = pad_to_multiple(img, 32);
  CHECK(p.height == 32);
  CHECK(p.width == 64);
  CHECK(p.points == img.points);
  CHECK(p.pixels[(31 * 64 + 63) * 3] == img.pixels[(29 * 33 + 32) * 3]);
  CHECK(pad_to_multiple(p, 32).pixels == p.pixels);
}

TEST_CASE("generator config JSON is strict and round-trips") {
  GeneratorConfig cfg;
  cfg.label_noise_rate = 0.2;
  cfg.count = 17;
  const auto j = generator_config_to_json(cfg);
  const GeneratorConfig back = generator_config_from_json(j);
  CHECK(back.count == 17);
  CHECK(back.label_noise_rate == 0.2);
  auto bad = j;
  bad["unknown_field"] = 1;
  CHECK_THROWS_AS(generator_config_from_json(bad), ValidationError);
}

TEST_CASE("dataset: split ratio, determinism and empty case") {
  GeneratorConfig cfg;
  cfg.count = 100;
  cfg.seed = 4;
  const Dataset a = generate_dataset(cfg);
  CHECK(a.train_ids.size() == 80);
  CHECK(a.test_ids.size() == 20);
  const Dataset b = generate_dataset(cfg);
  CHECK(a.train_ids == b.train_ids);
  CHECK(a.images.back().points == b.images.back().points);
  CHECK(a.split("train").size() == 80);
  CHECK_THROWS_AS(a.split("val"), ValidationError);

  cfg.count = 0;
  const Dataset empty = generate_dataset(cfg);
  CHECK(empty.images.empty());
  const fs::path dir = fresh_dir("empty_ds");
  write_dataset(empty, dir);
  CHECK(read_dataset(dir).images.empty());
}

TEST_CASE("dataset: lossless write/read round trip") {
  GeneratorConfig cfg;
  cfg.count = 5;
  cfg.seed = 8;
  const Dataset ds = generate_dataset(cfg);
  const fs::path dir = fresh_dir("roundtrip");
  write_dataset(ds, dir);
  const Dataset back = read_dataset(dir);
  REQUIRE(back.images.size() == 5);
  CHECK(back.train_ids == ds.train_ids);
  CHECK(back.test_ids == ds.test_ids);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(back.images[i].points == ds.images[i].points);
    // Pixels are stored as 8-bit PNG; the stored buffer is the quantized one.
    CHECK(back.images[i].pixels == from_rgb8(to_rgb8(ds.images[i].pixels, 64, 64)));
  }
}

TEST_CASE("annotation files: fixture, missing image and bounds") {
  const fs::path dir = fresh_dir("annotations");
  Rgb8Image png{8, 8, std::vector<std::uint8_t>(8 * 8 * 3, 200)};
  write_png_rgb8(dir / "a.png", png);
  {
    std::ofstream(dir / "a.json") << R"({"image": "a.png", "points": [{"x": 2.5, "y": 3.25, "class": 1}]})";
  }
  const AnnotatedImage img = read_annotated_image(dir / "a.json", dir);
  REQUIRE(img.points.size() == 1);
  const GroundTruthSet g = img.ground_truth();
  CHECK(g.coords[0] == Point2{2.5, 3.25});
  CHECK(g.classes[0] == 1);

  { std::ofstream(dir / "b.json") << R"({"image": "missing.png", "points": []})"; }
  CHECK_THROWS_AS(read_annotated_image(dir / "b.json", dir), ValidationError);

  { std::ofstream(dir / "c.json") << R"({"image": "a.png", "points": [{"x": 9.0, "y": 1, "class": 0}]})"; }
  CHECK_THROWS_AS(read_annotated_image(dir / "c.json", dir), ValidationError);

  { std::ofstream(dir / "d.json") << "{not json"; }
  CHECK_THROWS_AS(read_json_file(dir / "d.json"), IoError);
  CHECK_THROWS_AS(read_dataset(dir / "nowhere"), IoError);
}
