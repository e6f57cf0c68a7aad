// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pointcell/training.hpp"

namespace pointcell {

struct QSweepRow {
  double q = 0.0;
  double detection_f1 = 0.0;
  double classification_f1 = 0.0;
};

/// One training run per q with the config's seed and dataset. With an output
/// directory, runs go to q_<index>/ and q_sweep.csv + q_sweep.png are written.
std::vector<QSweepRow> sweep_q(const RunConfig& config, const Dataset& dataset,
                               const std::vector<double>& qs, const TrainCallbacks& callbacks = {});
std::string q_sweep_csv(const std::vector<QSweepRow>& rows);

struct BaselineSweepRow {
  std::string method;                 // "density" or "point"
  std::optional<int> min_distance;    // empty for the point-based row
  double detection_f1 = 0.0;
};

/// Density peaks evaluated per min_distance, plus an optional single row for
/// a point model.
std::vector<BaselineSweepRow> baseline_sweep(const DensityModel& density, const PointModel* point,
                                             const std::vector<const AnnotatedImage*>& images,
                                             const std::vector<int>& min_distances,
                                             double peak_threshold, double radius,
                                             double detection_threshold,
                                             std::size_t num_classes);
std::string baseline_sweep_csv(const std::vector<BaselineSweepRow>& rows);

struct AblationRow {
  std::string name;
  bool pfa_enabled = false;
  bool independent_classifier_enabled = false;
  std::vector<std::uint64_t> seeds;
  std::vector<double> detection_f1;
  std::vector<double> classification_f1;

  double mean_detection_f1() const;
  double mean_classification_f1() const;
};

/// baseline, +PFA, +PFA+IC, each trained once per seed.
std::vector<AblationRow> run_ablation(const RunConfig& config, const Dataset& dataset,
                                      const std::vector<std::uint64_t>& seeds,
                                      const TrainCallbacks& callbacks = {});
std::string ablation_csv(const std::vector<AblationRow>& rows);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace pointcell
