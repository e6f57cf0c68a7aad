// SPDX-License-Identifier: Apache-2.0
#include "pointcell/dataset.hpp"

#include <fstream>
#include <set>

#include "pointcell/errors.hpp"
#include "pointcell/image_io.hpp"

namespace fs = std::filesystem;

namespace pointcell {

std::vector<const AnnotatedImage*> Dataset::split(const std::string& name) const {
  const std::vector<std::string>* ids = nullptr;
  if (name == "train")
    ids = &train_ids;
  else if (name == "test")
    ids = &test_ids;
  else
    throw ValidationError("unknown split '" + name + "' (expected train or test)");
  std::vector<const AnnotatedImage*> out;
  for (const auto& id : *ids) out.push_back(&find(id));
  return out;
}

const AnnotatedImage& Dataset::find(const std::string& id) const {
  for (const auto& img : images)
    if (img.id == id) return img;
  throw ValidationError("dataset has no image with id '" + id + "'");
}

Dataset generate_dataset(const GeneratorConfig& config_in) {
  GeneratorConfig config = config_in;
  config.normalize();
  Dataset ds;
  ds.seed = config.seed;
  ds.generator = generator_config_to_json(config);
  const std::size_t n_train = config.count * 4 / 5;
  for (std::size_t i = 0; i < config.count; ++i) {
    AnnotatedImage img = generate_image(config, i);
    if (i < n_train) {
      img.points = inject_label_noise(img.points, config.label_noise_rate, config.num_classes,
                                      derive_seed(config.seed ^ 0x6E6F697365ULL, i));
      ds.train_ids.push_back(img.id);
    } else {
      ds.test_ids.push_back(img.id);
    }
    ds.images.push_back(std::move(img));
  }
  return ds;
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw IoError("failed writing " + path.string());
}

nlohmann::json annotation_to_json(const AnnotatedImage& image) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : image.points) pts.push_back({{"x", p.x}, {"y", p.y}, {"class", p.class_id}});
  return {{"image", image.id + ".png"}, {"points", pts}};
}

std::vector<GroundTruthPoint> points_from_json(const nlohmann::json& j, const std::string& context) {
  if (!j.is_array()) throw ValidationError(context + ": 'points' must be an array");
  std::vector<GroundTruthPoint> out;
  for (const auto& p : j) {
    if (!p.is_object() || !p.contains("x") || !p.contains("y") || !p.contains("class"))
      throw ValidationError(context + ": each point needs x, y and class");
    try {
      out.push_back({p.at("x").get<double>(), p.at("y").get<double>(), p.at("class").get<int>()});
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(context + ": " + e.what());
    }
  }
  return out;
}

AnnotatedImage read_annotated_image(const fs::path& annotation_path, const fs::path& images_dir) {
  const auto j = read_json_file(annotation_path);
  const std::string ctx = annotation_path.string();
  if (!j.is_object() || !j.contains("image") || !j["image"].is_string() || !j.contains("points"))
    throw ValidationError(ctx + ": annotation needs 'image' and 'points'");
  const fs::path image_path = images_dir / j["image"].get<std::string>();
  if (!fs::exists(image_path))
    throw ValidationError(ctx + ": referenced image " + image_path.string() + " does not exist");
  const auto rgb = read_png_rgb8(image_path);
  AnnotatedImage img;
  img.id = annotation_path.stem().string();
  img.height = rgb.height;
  img.width = rgb.width;
  img.pixels = from_rgb8(rgb);
  img.points = points_from_json(j["points"], ctx);
  try {
    img.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(ctx + ": " + e.what());
  }
  return img;
}

void write_dataset(const Dataset& dataset, const fs::path& directory) {
  std::error_code ec;
  fs::create_directories(directory / "images", ec);
  fs::create_directories(directory / "annotations", ec);
  if (ec) throw IoError("cannot create dataset directory " + directory.string() + ": " + ec.message());
  for (const auto& img : dataset.images) {
    img.validate();
    write_png_rgb8(directory / "images" / (img.id + ".png"), to_rgb8(img.pixels, img.height, img.width));
    write_json_file(directory / "annotations" / (img.id + ".json"), annotation_to_json(img));
  }
  write_json_file(directory / "manifest.json", {{"train", dataset.train_ids},
                                                {"test", dataset.test_ids},
                                                {"generator", dataset.generator},
                                                {"seed", dataset.seed}});
}

Dataset read_dataset(const fs::path& directory) {
  const auto manifest = read_json_file(directory / "manifest.json");
  Dataset ds;
  try {
    ds.train_ids = manifest.at("train").get<std::vector<std::string>>();
    ds.test_ids = manifest.at("test").get<std::vector<std::string>>();
    ds.seed = manifest.value("seed", std::uint64_t{0});
    ds.generator = manifest.value("generator", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError((directory / "manifest.json").string() + ": " + e.what());
  }
  std::set<std::string> seen;
  for (const auto* ids : {&ds.train_ids, &ds.test_ids})
    for (const auto& id : *ids) {
      if (!seen.insert(id).second)
        throw ValidationError("manifest lists image '" + id + "' more than once");
      ds.images.push_back(
          read_annotated_image(directory / "annotations" / (id + ".json"), directory / "images"));
    }
  return ds;
}

}  // namespace pointcell
