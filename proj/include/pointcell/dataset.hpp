// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "pointcell/synthetic.hpp"

namespace pointcell {

/// Images plus a train/test split. On disk:
///   images/<id>.png, annotations/<id>.json, manifest.json
struct Dataset {
  std::vector<AnnotatedImage> images;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  nlohmann::json generator = nlohmann::json::object();
  std::uint64_t seed = 0;

  std::vector<const AnnotatedImage*> split(const std::string& name) const;
  const AnnotatedImage& find(const std::string& id) const;
};

/// First 4/5 of the images (rounded down) go to train; label noise from the
/// generator config is applied to the train split only.
Dataset generate_dataset(const GeneratorConfig& config);

void write_dataset(const Dataset& dataset, const std::filesystem::path& directory);
/// Validates every annotation against its image; IO errors carry the path.
Dataset read_dataset(const std::filesystem::path& directory);

/// `{"image": "<name>.png", "points": [{"x":..., "y":..., "class":...}, ...]}`
nlohmann::json annotation_to_json(const AnnotatedImage& image);
std::vector<GroundTruthPoint> points_from_json(const nlohmann::json& j, const std::string& context);
/// Reads one annotation file and the PNG it references (relative to `images_dir`).
AnnotatedImage read_annotated_image(const std::filesystem::path& annotation_path,
                                    const std::filesystem::path& images_dir);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace pointcell
