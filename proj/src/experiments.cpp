// SPDX-License-Identifier: Apache-2.0
#include "pointcell/experiments.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

#include "pointcell/errors.hpp"
#include "pointcell/render.hpp"

namespace pointcell {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<QSweepRow> sweep_q(const RunConfig& config, const Dataset& dataset,
                               const std::vector<double>& qs, const TrainCallbacks& callbacks) {
  if (qs.empty()) throw ValidationError("sweep_q: empty q list");
  std::vector<RunConfig> runs;
  for (double q : qs) {
    RunConfig c = config;
    c.loss.q = q;
    c.validate();
    runs.push_back(c);
  }
  std::vector<QSweepRow> rows;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    RunConfig& c = runs[i];
    if (!config.output_dir.empty())
      c.output_dir = (fs::path(config.output_dir) / ("q_" + std::to_string(i))).string();
    const auto trained = run_point_training(c, dataset, {}, callbacks);
    rows.push_back({c.loss.q, trained.result.final_test.detection.f1,
                    trained.result.final_test.classification_macro.f1});
  }
  if (!config.output_dir.empty()) {
    const fs::path out = config.output_dir;
    write_text_file(out / "q_sweep.csv", q_sweep_csv(rows));
    PlotSeries det, cls;
    for (const auto& r : rows) {
      det.x.push_back(r.q), det.y.push_back(r.detection_f1);
      cls.x.push_back(r.q), cls.y.push_back(r.classification_f1);
    }
    write_png_rgb8(out / "q_sweep.png", render_line_plot({cls, det}));
  }
  return rows;
}

std::string q_sweep_csv(const std::vector<QSweepRow>& rows) {
  std::string s = "q,detection_f1,classification_f1\n";
  for (const auto& r : rows)
    s += fmt(r.q) + "," + fmt(r.detection_f1) + "," + fmt(r.classification_f1) + "\n";
  return s;
}

std::vector<BaselineSweepRow> baseline_sweep(const DensityModel& density, const PointModel* point,
                                             const std::vector<const AnnotatedImage*>& images,
                                             const std::vector<int>& min_distances,
                                             double peak_threshold, double radius,
                                             double detection_threshold,
                                             std::size_t num_classes) {
  if (min_distances.empty()) throw ValidationError("baseline_sweep: empty min_distance list");
  std::vector<BaselineSweepRow> rows;
  for (int d : min_distances) {
    const PeakParams params{d, peak_threshold};
    const auto report = evaluate_density_model(density, images, params, radius, num_classes);
    rows.push_back({"density", d, report.detection.f1});
  }
  if (point) {
    const auto report = evaluate_point_model(*point, images, radius, detection_threshold);
    rows.push_back({"point", std::nullopt, report.detection.f1});
  }
  return rows;
}

std::string baseline_sweep_csv(const std::vector<BaselineSweepRow>& rows) {
  std::string s = "method,min_distance,detection_f1\n";
  for (const auto& r : rows)
    s += r.method + "," + (r.min_distance ? std::to_string(*r.min_distance) : "") + "," +
         fmt(r.detection_f1) + "\n";
  return s;
}

double AblationRow::mean_detection_f1() const { return mean(detection_f1); }
double AblationRow::mean_classification_f1() const { return mean(classification_f1); }

std::vector<AblationRow> run_ablation(const RunConfig& config, const Dataset& dataset,
                                      const std::vector<std::uint64_t>& seeds,
                                      const TrainCallbacks& callbacks) {
  if (seeds.empty()) throw ValidationError("run_ablation: empty seed list");
  std::vector<AblationRow> rows{{"baseline", false, false, {}, {}, {}},
                                {"+PFA", true, false, {}, {}, {}},
                                {"+PFA+IC", true, true, {}, {}, {}}};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::uint64_t seed : seeds) {
      RunConfig c = config;
      c.backbone.pfa_enabled = rows[r].pfa_enabled;
      c.backbone.independent_classifier_enabled = rows[r].independent_classifier_enabled;
      c.seed = seed;
      if (!config.output_dir.empty())
        c.output_dir = (fs::path(config.output_dir) /
                        ("ablation_" + std::to_string(r) + "_seed_" + std::to_string(seed)))
                           .string();
      const auto trained = run_point_training(c, dataset, {}, callbacks);
      rows[r].seeds.push_back(seed);
      rows[r].detection_f1.push_back(trained.result.final_test.detection.f1);
      rows[r].classification_f1.push_back(trained.result.final_test.classification_macro.f1);
    }
  }
  if (!config.output_dir.empty())
    write_text_file(fs::path(config.output_dir) / "ablation.csv", ablation_csv(rows));
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string s =
      "config,pfa_enabled,independent_classifier_enabled,seeds,detection_f1_mean,"
      "classification_f1_mean\n";
  for (const auto& r : rows)
    s += r.name + "," + (r.pfa_enabled ? "true" : "false") + "," +
         (r.independent_classifier_enabled ? "true" : "false") + "," +
         std::to_string(r.seeds.size()) + "," + fmt(r.mean_detection_f1()) + "," +
         fmt(r.mean_classification_f1()) + "\n";
  return s;
}

}  // namespace pointcell
