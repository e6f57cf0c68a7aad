// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "pointcell/types.hpp"

namespace pointcell {

/// H x W x 3 pixels in [0, 1] with point annotations.
struct AnnotatedImage {
  std::string id;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;  // row-major, interleaved RGB
  std::vector<GroundTruthPoint> points;

  GroundTruthSet ground_truth() const { return GroundTruthSet::from_points(points); }
  /// Pixel count and point-in-image invariants; throws ValidationError.
  void validate() const;
};

struct ClassAppearance {
  std::array<double, 2> radius_range{4.0, 6.0};
  std::array<double, 3> color_mean{0.6, 0.3, 0.3};
  double color_std = 0.03;
  double intensity = 1.0;
};

struct GeneratorConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::array<std::size_t, 2> cell_count_range{3, 8};
  double min_separation = 14.0;
  std::size_t num_classes = 2;
  std::vector<ClassAppearance> class_appearance;  // one per class; defaults filled in
  std::array<double, 3> background{0.92, 0.9, 0.86};
  double background_noise_std = 0.02;
  double label_noise_rate = 0.0;
  std::uint64_t seed = 0;
  std::size_t count = 100;  // images per dataset

  /// Fills missing class appearances from the default palette and checks
  /// every field; throws ValidationError naming the field.
  void normalize();
};

/// Stain-like palette: brown (positive-like) and blue (negative-like)
/// discs, followed by further distinct hues.
std::vector<ClassAppearance> default_class_appearance(std::size_t num_classes);

struct AugmentationConfig {
  std::array<double, 2> crop_scale_range{0.6, 1.0};
  double horizontal_flip_prob = 0.5;
  double vertical_flip_prob = 0.5;
  // 0 keeps the input extent.
  std::size_t output_height = 0;
  std::size_t output_width = 0;

  void validate() const;
};

/// Pure function of (config, index). Places centers by rejection sampling
/// with the minimum separation, renders anti-aliased discs and adds Gaussian
/// pixel noise. Labels are clean. Throws DensityInfeasibleError when the
/// placement budget is exhausted.
AnnotatedImage generate_image(const GeneratorConfig& config, std::size_t index);

/// Each label independently replaced, with probability `rate`, by a
/// uniformly drawn different class.
std::vector<GroundTruthPoint> inject_label_noise(const std::vector<GroundTruthPoint>& points,
                                                 double rate, std::size_t num_classes,
                                                 std::uint64_t seed);

/// Random resized crop followed by optional flips. Points undergo the same
/// map as pixel centers; points outside the crop are dropped.
AnnotatedImage augment(const AnnotatedImage& image, const AugmentationConfig& config,
                       std::uint64_t seed);

/// Deterministic crop window + flip parameters, exposed for tests.
struct AugmentationParams {
  double x0 = 0.0, y0 = 0.0, crop_w = 0.0, crop_h = 0.0;
  bool flip_h = false, flip_v = false;
};
AugmentationParams sample_augmentation(std::size_t height, std::size_t width,
                                       const AugmentationConfig& config, std::uint64_t seed);
AnnotatedImage apply_augmentation(const AnnotatedImage& image, const AugmentationParams& params,
                                  std::size_t out_h, std::size_t out_w);

/// Pads with edge replication so both sides are multiples of `multiple`.
AnnotatedImage pad_to_multiple(const AnnotatedImage& image, std::size_t multiple);

/// Splits a 64-bit seed and stream index into an independent seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

nlohmann::json generator_config_to_json(const GeneratorConfig& config);
/// Strict parse: unknown keys are rejected with ValidationError.
GeneratorConfig generator_config_from_json(const nlohmann::json& j);

nlohmann::json augmentation_config_to_json(const AugmentationConfig& config);
AugmentationConfig augmentation_config_from_json(const nlohmann::json& j);

}  // namespace pointcell
