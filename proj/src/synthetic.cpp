// SPDX-License-Identifier: Apache-2.0
#include "pointcell/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pointcell/errors.hpp"
#include "pointcell/json_util.hpp"

namespace pointcell {

void AnnotatedImage::validate() const {
  if (height == 0 || width == 0) throw ValidationError("image '" + id + "' has zero size");
  if (pixels.size() != height * width * 3)
    throw ValidationError("image '" + id + "' pixel buffer does not match its size");
  for (const auto& p : points) {
    if (!(p.x >= 0.0 && p.x < static_cast<double>(width) && p.y >= 0.0 &&
          p.y < static_cast<double>(height)))
      throw ValidationError("image '" + id + "' has point (" + std::to_string(p.x) + ", " +
                            std::to_string(p.y) + ") outside its bounds");
    if (p.class_id < 0) throw ValidationError("image '" + id + "' has a negative class id");
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over the combined words
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<ClassAppearance> default_class_appearance(std::size_t num_classes) {
  std::vector<ClassAppearance> out;
  const std::array<std::array<double, 3>, 4> base{{{0.55, 0.33, 0.18},
                                                   {0.32, 0.38, 0.68},
                                                   {0.78, 0.70, 0.25},
                                                   {0.82, 0.50, 0.62}}};
  for (std::size_t c = 0; c < num_classes; ++c) {
    ClassAppearance a;
    if (c < base.size()) {
      a.color_mean = base[c];
    } else {
      const double h = std::fmod(0.13 * static_cast<double>(c), 1.0) * 6.0;
      const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
      std::array<double, 3> rgb{};
      switch (static_cast<int>(h)) {
        case 0: rgb = {1, x, 0}; break;
        case 1: rgb = {x, 1, 0}; break;
        case 2: rgb = {0, 1, x}; break;
        case 3: rgb = {0, x, 1}; break;
        case 4: rgb = {x, 0, 1}; break;
        default: rgb = {1, 0, x}; break;
      }
      for (auto& v : rgb) v = 0.2 + 0.6 * v;
      a.color_mean = rgb;
    }
    a.radius_range = (c % 2 == 0) ? std::array<double, 2>{4.5, 6.5} : std::array<double, 2>{3.5, 5.5};
    out.push_back(a);
  }
  return out;
}

void GeneratorConfig::normalize() {
  if (height == 0 || width == 0) throw ValidationError("generator.image_size must be positive");
  if (cell_count_range[0] > cell_count_range[1])
    throw ValidationError("generator.cell_count_range must satisfy min <= max");
  if (min_separation < 0) throw ValidationError("generator.min_separation must be >= 0");
  if (num_classes < 1) throw ValidationError("generator.num_classes must be >= 1");
  if (background_noise_std < 0) throw ValidationError("generator.background_noise_std must be >= 0");
  if (!(label_noise_rate >= 0.0 && label_noise_rate < 1.0))
    throw ValidationError("generator.label_noise_rate must lie in [0, 1)");
  if (class_appearance.size() > num_classes)
    throw ValidationError("generator.class_appearance has more entries than classes");
  const auto defaults = default_class_appearance(num_classes);
  for (std::size_t c = class_appearance.size(); c < num_classes; ++c)
    class_appearance.push_back(defaults[c]);
  for (const auto& a : class_appearance)
    if (a.radius_range[0] <= 0 || a.radius_range[0] > a.radius_range[1])
      throw ValidationError("generator.class_appearance.radius_range must be positive and ordered");
}

AnnotatedImage generate_image(const GeneratorConfig& config_in, std::size_t index) {
  GeneratorConfig config = config_in;
  config.normalize();
  std::mt19937_64 rng(derive_seed(config.seed, index));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  AnnotatedImage img;
  img.id = "img_" + std::to_string(index);
  img.height = config.height;
  img.width = config.width;

  const std::size_t count =
      config.cell_count_range[0] +
      static_cast<std::size_t>(unit(rng) *
                               static_cast<double>(config.cell_count_range[1] -
                                                   config.cell_count_range[0] + 1));
  const std::size_t n_cells = std::min(count, config.cell_count_range[1]);

  struct Cell {
    double x, y, radius;
    int cls;
    std::array<double, 3> color;
  };
  std::vector<Cell> cells;
  constexpr int kAttemptsPerCell = 2000;
  const double max_x = static_cast<double>(config.width - 1);
  const double max_y = static_cast<double>(config.height - 1);
  for (std::size_t k = 0; k < n_cells; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kAttemptsPerCell && !placed; ++attempt) {
      const double x = unit(rng) * max_x;
      const double y = unit(rng) * max_y;
      bool ok = true;
      for (const auto& c : cells)
        if (std::hypot(c.x - x, c.y - y) < config.min_separation) {
          ok = false;
          break;
        }
      if (!ok) continue;
      const int cls = static_cast<int>(
          std::min<std::size_t>(static_cast<std::size_t>(unit(rng) * static_cast<double>(config.num_classes)),
                                config.num_classes - 1));
      const auto& look = config.class_appearance[static_cast<std::size_t>(cls)];
      const double radius =
          look.radius_range[0] + unit(rng) * (look.radius_range[1] - look.radius_range[0]);
      std::array<double, 3> color{};
      for (std::size_t ch = 0; ch < 3; ++ch)
        color[ch] = std::clamp((look.color_mean[ch] + look.color_std * normal(rng)) * look.intensity,
                               0.0, 1.0);
      cells.push_back({x, y, radius, cls, color});
      placed = true;
    }
    if (!placed)
      throw DensityInfeasibleError("could not place cell " + std::to_string(k + 1) + " of " +
                                   std::to_string(n_cells) + " with min_separation " +
                                   std::to_string(config.min_separation) + " in a " +
                                   std::to_string(config.width) + "x" +
                                   std::to_string(config.height) + " image");
  }

  img.pixels.resize(config.height * config.width * 3);
  for (std::size_t y = 0; y < config.height; ++y)
    for (std::size_t x = 0; x < config.width; ++x) {
      std::array<double, 3> px = config.background;
      for (const auto& c : cells) {
        const double d = std::hypot(static_cast<double>(x) - c.x, static_cast<double>(y) - c.y);
        const double a = std::clamp(c.radius + 0.5 - d, 0.0, 1.0);
        if (a <= 0.0) continue;
        // Slightly darker towards the rim.
        const double shade = 1.0 - 0.2 * std::min(1.0, d / c.radius);
        for (std::size_t ch = 0; ch < 3; ++ch) px[ch] = (1.0 - a) * px[ch] + a * c.color[ch] * shade;
      }
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double v = std::clamp(px[ch] + config.background_noise_std * normal(rng), 0.0, 1.0);
        img.pixels[(y * config.width + x) * 3 + ch] =
            static_cast<float>(std::round(v * 255.0) / 255.0);
      }
    }
  for (const auto& c : cells) img.points.push_back({c.x, c.y, c.cls});
  return img;
}

std::vector<GroundTruthPoint> inject_label_noise(const std::vector<GroundTruthPoint>& points,
                                                 double rate, std::size_t num_classes,
                                                 std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ContractError("label noise rate must lie in [0, 1)");
  std::vector<GroundTruthPoint> out = points;
  if (num_classes < 2 || rate == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& p : out) {
    const double u = unit(rng);
    const double pick = unit(rng);
    if (u >= rate) continue;
    auto other = static_cast<int>(pick * static_cast<double>(num_classes - 1));
    other = std::min(other, static_cast<int>(num_classes) - 2);
    if (other >= p.class_id) ++other;
    p.class_id = other;
  }
  return out;
}

void AugmentationConfig::validate() const {
  const auto [lo, hi] = crop_scale_range;
  if (!(lo > 0.0 && lo <= hi && hi <= 1.0))
    throw ValidationError("augmentation.crop_scale_range must satisfy 0 < lo <= hi <= 1");
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(horizontal_flip_prob) || !prob(vertical_flip_prob))
    throw ValidationError("augmentation flip probabilities must lie in [0, 1]");
  if ((output_height == 0) != (output_width == 0))
    throw ValidationError("augmentation.output_size must be both zero or both positive");
}

AugmentationParams sample_augmentation(std::size_t height, std::size_t width,
                                       const AugmentationConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double s = config.crop_scale_range[0] +
                   unit(rng) * (config.crop_scale_range[1] - config.crop_scale_range[0]);
  AugmentationParams p;
  p.crop_w = static_cast<double>(width) * std::sqrt(s);
  p.crop_h = static_cast<double>(height) * std::sqrt(s);
  p.x0 = unit(rng) * (static_cast<double>(width) - p.crop_w);
  p.y0 = unit(rng) * (static_cast<double>(height) - p.crop_h);
  p.flip_h = unit(rng) < config.horizontal_flip_prob;
  p.flip_v = unit(rng) < config.vertical_flip_prob;
  return p;
}

AnnotatedImage apply_augmentation(const AnnotatedImage& image, const AugmentationParams& p,
                                  std::size_t out_h, std::size_t out_w) {
  image.validate();
  AnnotatedImage out;
  out.id = image.id;
  out.height = out_h;
  out.width = out_w;
  out.pixels.resize(out_h * out_w * 3);
  const double sx = p.crop_w / static_cast<double>(out_w);
  const double sy = p.crop_h / static_cast<double>(out_h);
  const double max_x = static_cast<double>(image.width - 1);
  const double max_y = static_cast<double>(image.height - 1);
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    const std::size_t ty = p.flip_v ? out_h - 1 - oy : oy;
    const double fy = std::clamp(p.y0 + (static_cast<double>(ty) + 0.5) * sy - 0.5, 0.0, max_y);
    const auto y0 = static_cast<std::size_t>(std::floor(fy));
    const std::size_t y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const std::size_t tx = p.flip_h ? out_w - 1 - ox : ox;
      const double fx = std::clamp(p.x0 + (static_cast<double>(tx) + 0.5) * sx - 0.5, 0.0, max_x);
      const auto x0 = static_cast<std::size_t>(std::floor(fx));
      const std::size_t x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < 3; ++c) {
        auto at = [&](std::size_t yy, std::size_t xx) {
          return static_cast<double>(image.pixels[(yy * image.width + xx) * 3 + c]);
        };
        const double top = at(y0, x0) + wx * (at(y0, x1) - at(y0, x0));
        const double bot = at(y1, x0) + wx * (at(y1, x1) - at(y1, x0));
        out.pixels[(oy * out_w + ox) * 3 + c] = static_cast<float>(top + wy * (bot - top));
      }
    }
  }
  const double lim_x = static_cast<double>(out_w - 1);
  const double lim_y = static_cast<double>(out_h - 1);
  for (const auto& pt : image.points) {
    double x = (pt.x - p.x0 + 0.5) / sx - 0.5;
    double y = (pt.y - p.y0 + 0.5) / sy - 0.5;
    if (!(x >= 0.0 && x <= lim_x && y >= 0.0 && y <= lim_y)) continue;
    if (p.flip_h) x = lim_x - x;
    if (p.flip_v) y = lim_y - y;
    out.points.push_back({x, y, pt.class_id});
  }
  return out;
}

AnnotatedImage augment(const AnnotatedImage& image, const AugmentationConfig& config,
                       std::uint64_t seed) {
  const auto params = sample_augmentation(image.height, image.width, config, seed);
  const std::size_t h = config.output_height ? config.output_height : image.height;
  const std::size_t w = config.output_width ? config.output_width : image.width;
  return apply_augmentation(image, params, h, w);
}

AnnotatedImage pad_to_multiple(const AnnotatedImage& image, std::size_t multiple) {
  const std::size_t h = (image.height + multiple - 1) / multiple * multiple;
  const std::size_t w = (image.width + multiple - 1) / multiple * multiple;
  if (h == image.height && w == image.width) return image;
  AnnotatedImage out = image;
  out.height = h;
  out.width = w;
  out.pixels.assign(h * w * 3, 0.0f);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t sy = std::min(y, image.height - 1), sx = std::min(x, image.width - 1);
      for (std::size_t c = 0; c < 3; ++c)
        out.pixels[(y * w + x) * 3 + c] = image.pixels[(sy * image.width + sx) * 3 + c];
    }
  return out;
}

nlohmann::json generator_config_to_json(const GeneratorConfig& c) {
  nlohmann::json looks = nlohmann::json::array();
  for (const auto& a : c.class_appearance)
    looks.push_back({{"radius_range", a.radius_range},
                     {"color_mean", a.color_mean},
                     {"color_std", a.color_std},
                     {"intensity", a.intensity}});
  return {{"image_size", {c.height, c.width}},
          {"cell_count_range", c.cell_count_range},
          {"min_separation", c.min_separation},
          {"num_classes", c.num_classes},
          {"class_appearance", looks},
          {"background", c.background},
          {"background_noise_std", c.background_noise_std},
          {"label_noise_rate", c.label_noise_rate},
          {"seed", c.seed},
          {"count", c.count}};
}

GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
  using namespace json_util;
  const std::string ctx = "generator";
  check_keys(j,
             {"image_size", "cell_count_range", "min_separation", "num_classes", "class_appearance",
              "background", "background_noise_std", "label_noise_rate", "seed", "count"},
             ctx);
  GeneratorConfig c;
  std::array<std::size_t, 2> size{c.height, c.width};
  read(j, "image_size", size, ctx);
  c.height = size[0];
  c.width = size[1];
  read(j, "cell_count_range", c.cell_count_range, ctx);
  read(j, "min_separation", c.min_separation, ctx);
  read(j, "num_classes", c.num_classes, ctx);
  read(j, "background", c.background, ctx);
  read(j, "background_noise_std", c.background_noise_std, ctx);
  read(j, "label_noise_rate", c.label_noise_rate, ctx);
  read(j, "seed", c.seed, ctx);
  read(j, "count", c.count, ctx);
  if (auto it = j.find("class_appearance"); it != j.end()) {
    if (!it->is_array()) throw ValidationError("generator.class_appearance must be an array");
    for (const auto& e : *it) {
      const std::string ectx = ctx + ".class_appearance";
      check_keys(e, {"radius_range", "color_mean", "color_std", "intensity"}, ectx);
      ClassAppearance a;
      read(e, "radius_range", a.radius_range, ectx);
      read(e, "color_mean", a.color_mean, ectx);
      read(e, "color_std", a.color_std, ectx);
      read(e, "intensity", a.intensity, ectx);
      c.class_appearance.push_back(a);
    }
  }
  c.normalize();
  return c;
}

nlohmann::json augmentation_config_to_json(const AugmentationConfig& c) {
  return {{"crop_scale_range", c.crop_scale_range},
          {"horizontal_flip_prob", c.horizontal_flip_prob},
          {"vertical_flip_prob", c.vertical_flip_prob},
          {"output_size", {c.output_height, c.output_width}}};
}

AugmentationConfig augmentation_config_from_json(const nlohmann::json& j) {
  using namespace json_util;
  const std::string ctx = "augmentation";
  check_keys(j, {"crop_scale_range", "horizontal_flip_prob", "vertical_flip_prob", "output_size"},
             ctx);
  AugmentationConfig c;
  read(j, "crop_scale_range", c.crop_scale_range, ctx);
  read(j, "horizontal_flip_prob", c.horizontal_flip_prob, ctx);
  read(j, "vertical_flip_prob", c.vertical_flip_prob, ctx);
  std::array<std::size_t, 2> size{c.output_height, c.output_width};
  read(j, "output_size", size, ctx);
  c.output_height = size[0];
  c.output_width = size[1];
  c.validate();
  return c;
}

}  // namespace pointcell
