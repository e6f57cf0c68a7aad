// SPDX-License-Identifier: Apache-2.0
// pointcell: dataset generation, training, evaluation and experiment sweeps.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pointcell/checkpoint.hpp"
#include "pointcell/dataset.hpp"
#include "pointcell/errors.hpp"
#include "pointcell/experiments.hpp"
#include "pointcell/image_io.hpp"
#include "pointcell/render.hpp"
#include "pointcell/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pointcell;

namespace {

struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string dataset;
  std::string output_dir;
  long long epochs = -1;
  long long seed = -1;
};

void add_config_flags(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON run config");
  cmd->add_option("--set", args.overrides, "Override a config field, e.g. loss.q=0.4");
  cmd->add_option("--dataset", args.dataset, "Dataset directory");
  cmd->add_option("--output-dir", args.output_dir, "Run output directory");
  cmd->add_option("--epochs", args.epochs, "Training epochs");
  cmd->add_option("--seed", args.seed, "Run seed");
}

json load_config_json(const ConfigArgs& args) {
  json j = args.config_path.empty() ? json::object() : read_json_file(args.config_path);
  if (!args.dataset.empty()) j["dataset"] = args.dataset;
  if (!args.output_dir.empty()) j["output_dir"] = args.output_dir;
  if (args.epochs >= 0) j["epochs"] = args.epochs;
  if (args.seed >= 0) j["seed"] = args.seed;
  for (const auto& o : args.overrides) apply_override(j, o);
  return j;
}

RunConfig load_run_config(const ConfigArgs& args) {
  RunConfig c = run_config_from_json(load_config_json(args));
  if (c.dataset.empty()) throw ValidationError("config.dataset is required");
  return c;
}

void emit(const json& j, const std::string& path) {
  if (path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json_file(path, j);
  }
}

void log_step(const StepLog& s) {
  if (s.step % 50 == 0)
    std::fprintf(stderr, "step %zu epoch %zu loss %.6f (reg %.4f det %.4f cls %.4f)\n", s.step,
                 s.epoch, s.loss.total, s.loss.reg, s.loss.det, s.loss.cls);
}

void log_epoch(const EpochLog& e) {
  std::fprintf(stderr, "epoch %zu test det F1 %.4f cls F1 %.4f (%.1fs)\n", e.epoch,
               e.test.detection.f1, e.test.classification_macro.f1, e.elapsed_seconds);
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      if constexpr (std::is_same_v<T, double>)
        out.push_back(std::stod(item, &used));
      else
        out.push_back(static_cast<T>(std::stoll(item, &used)));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError(std::string(what) + ": cannot parse '" + item + "'");
    }
  }
  if (out.empty()) throw ValidationError(std::string(what) + ": empty list");
  return out;
}

std::vector<OverlayMarker> markers_from_json(const json& j, const std::string& context) {
  const char* key = j.contains("predictions") ? "predictions" : "points";
  if (!j.contains(key)) throw ValidationError(context + ": expected 'points' or 'predictions'");
  std::vector<OverlayMarker> out;
  for (const auto& p : points_from_json(j[key], context)) out.push_back({p.x, p.y, p.class_id});
  return out;
}

json predictions_json(const std::vector<Prediction>& preds) {
  json arr = json::array();
  for (const auto& p : preds)
    arr.push_back({{"x", p.x}, {"y", p.y}, {"score", p.score}, {"class", p.class_id}});
  return arr;
}

int run(int argc, char** argv) {
  CLI::App app{"Point-based cell recognition: training, evaluation and sweeps"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
  std::string gen_config, gen_out;
  std::vector<std::string> gen_sets;
  gen->add_option("--config", gen_config, "Generator config JSON");
  gen->add_option("--set", gen_sets, "Override a generator field");
  gen->add_option("--out", gen_out, "Dataset directory")->required();
  gen->callback([&] {
    json j = gen_config.empty() ? json::object() : read_json_file(gen_config);
    for (const auto& o : gen_sets) apply_override(j, o);
    const GeneratorConfig cfg = generator_config_from_json(j);
    const Dataset ds = generate_dataset(cfg);
    write_dataset(ds, gen_out);
    std::cout << json{{"images", ds.images.size()},
                      {"train", ds.train_ids.size()},
                      {"test", ds.test_ids.size()},
                      {"out", gen_out}}
                     .dump()
              << '\n';
  });

  // train
  auto* train = app.add_subcommand("train", "Train the point model");
  ConfigArgs train_args;
  std::string resume;
  add_config_flags(train, train_args);
  train->add_option("--resume", resume, "Checkpoint to resume from");
  train->callback([&] {
    const RunConfig c = load_run_config(train_args);
    const Dataset ds = read_dataset(c.dataset);
    std::optional<fs::path> from;
    if (!resume.empty()) from = resume;
    const auto t = run_point_training(c, ds, from, {log_step, log_epoch});
    json out = metrics_to_json(t.result.final_test);
    out.erase("matched_pairs");
    std::cout << out.dump() << '\n';
  });

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a point-model checkpoint");
  ConfigArgs eval_args;
  std::string eval_ckpt, eval_split = "test", eval_out, eval_matcher;
  double eval_radius = 0.0, eval_threshold = 0.0;
  bool eval_timing = false;
  add_config_flags(eval, eval_args);
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval->add_option("--split", eval_split, "train or test");
  auto* radius_opt = eval->add_option("--radius", eval_radius, "Matching radius in pixels");
  auto* threshold_opt = eval->add_option("--threshold", eval_threshold, "Objectness threshold");
  eval->add_option("--matcher", eval_matcher, "greedy or hungarian");
  eval->add_flag("--timing", eval_timing, "Add mean inference seconds per image");
  eval->add_option("--out", eval_out, "Output JSON (default stdout)");
  eval->callback([&] {
    json j = load_config_json(eval_args);
    if (radius_opt->count() > 0) j["eval_radius"] = eval_radius;
    if (threshold_opt->count() > 0) j["detection_threshold"] = eval_threshold;
    if (!eval_matcher.empty()) j["eval_matcher"] = eval_matcher;
    const RunConfig c = run_config_from_json(j);
    if (c.dataset.empty()) throw ValidationError("config.dataset is required");
    PointModel model(c.backbone, c.seed);
    load_checkpoint(eval_ckpt, model.parameters());
    const Dataset ds = read_dataset(c.dataset);
    const auto images = ds.split(eval_split);
    json out = metrics_to_json(
        evaluate_point_model(model, images, c.eval_radius, c.detection_threshold, c.eval_matcher));
    out["split"] = eval_split;
    out["radius"] = c.eval_radius;
    out["threshold"] = c.detection_threshold;
    if (eval_timing) out["inference_seconds_per_image"] =
        time_inference(model, images, c.detection_threshold);
    emit(out, eval_out);
  });

  // infer
  auto* infer = app.add_subcommand("infer", "Predict points for one image");
  ConfigArgs infer_args;
  std::string infer_ckpt, infer_image, infer_out, infer_render;
  add_config_flags(infer, infer_args);
  infer->add_option("--checkpoint", infer_ckpt, "Checkpoint file")->required();
  infer->add_option("--image", infer_image, "Input PNG")->required();
  infer->add_option("--out", infer_out, "Output JSON (default stdout)");
  infer->add_option("--render", infer_render, "Also write an overlay PNG");
  infer->callback([&] {
    const RunConfig c = run_config_from_json(load_config_json(infer_args));
    PointModel model(c.backbone, c.seed);
    load_checkpoint(infer_ckpt, model.parameters());
    const Rgb8Image rgb = read_png_rgb8(infer_image);
    AnnotatedImage img{fs::path(infer_image).stem().string(), rgb.height, rgb.width,
                       from_rgb8(rgb), {}};
    const auto preds = predict_points(model, img, c.detection_threshold);
    emit({{"image", fs::path(infer_image).filename().string()},
          {"predictions", predictions_json(preds)}},
         infer_out);
    if (!infer_render.empty()) {
      std::vector<OverlayMarker> markers;
      for (const auto& p : preds) markers.push_back({p.x, p.y, p.class_id});
      write_png_rgb8(infer_render, render_overlay(rgb, markers, c.backbone.num_classes));
    }
  });

  // sweep-q
  auto* sweep = app.add_subcommand("sweep-q", "Train one model per GCE exponent q");
  ConfigArgs sweep_args;
  std::string q_list = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";
  add_config_flags(sweep, sweep_args);
  sweep->add_option("--q", q_list, "Comma-separated q values");
  sweep->callback([&] {
    const RunConfig c = load_run_config(sweep_args);
    const Dataset ds = read_dataset(c.dataset);
    const auto rows = sweep_q(c, ds, parse_list<double>(q_list, "--q"), {log_step, nullptr});
    std::cout << q_sweep_csv(rows);
  });

  // baseline-train
  auto* btrain = app.add_subcommand("baseline-train", "Train the density-map baseline");
  ConfigArgs btrain_args;
  add_config_flags(btrain, btrain_args);
  btrain->callback([&] {
    const RunConfig c = load_run_config(btrain_args);
    const Dataset ds = read_dataset(c.dataset);
    const auto t = run_density_training(c, ds, [](std::size_t step, double loss) {
      if (step % 50 == 0) std::fprintf(stderr, "step %zu loss %.6f\n", step, loss);
    });
    const auto report = evaluate_density_model(
        *t.model, ds.split("test"), {c.density.min_distance, c.density.peak_threshold},
        c.eval_radius, c.backbone.num_classes);
    json out = metrics_to_json(report);
    out.erase("matched_pairs");
    std::cout << out.dump() << '\n';
  });

  // baseline-sweep
  auto* bsweep = app.add_subcommand("baseline-sweep", "Density F1 across peak min_distance");
  ConfigArgs bsweep_args;
  std::string bs_ckpt, bs_point_ckpt, bs_split = "test", bs_out;
  std::string md_list = "3,6,12,24";
  add_config_flags(bsweep, bsweep_args);
  bsweep->add_option("--checkpoint", bs_ckpt, "Density checkpoint")->required();
  bsweep->add_option("--point-checkpoint", bs_point_ckpt, "Point-model checkpoint for contrast");
  bsweep->add_option("--min-distance", md_list, "Comma-separated min_distance values");
  bsweep->add_option("--split", bs_split, "train or test");
  bsweep->add_option("--out", bs_out, "Output directory for CSV and plot");
  bsweep->callback([&] {
    const RunConfig c = load_run_config(bsweep_args);
    const Dataset ds = read_dataset(c.dataset);
    auto density = make_density_model(c);
    load_checkpoint(bs_ckpt, density->parameters());
    std::unique_ptr<PointModel> point;
    if (!bs_point_ckpt.empty()) {
      point = std::make_unique<PointModel>(c.backbone, c.seed);
      load_checkpoint(bs_point_ckpt, point->parameters());
    }
    const auto distances = parse_list<int>(md_list, "--min-distance");
    const auto rows =
        baseline_sweep(*density, point.get(), ds.split(bs_split), distances,
                       c.density.peak_threshold, c.eval_radius, c.detection_threshold,
                       c.backbone.num_classes);
    const std::string csv = baseline_sweep_csv(rows);
    if (!bs_out.empty()) {
      write_text_file(fs::path(bs_out) / "baseline_sweep.csv", csv);
      PlotSeries density_series, point_series;
      for (const auto& r : rows) {
        if (r.min_distance) {
          density_series.x.push_back(*r.min_distance);
          density_series.y.push_back(r.detection_f1);
        }
      }
      std::vector<PlotSeries> series{density_series};
      for (const auto& r : rows)
        if (!r.min_distance && !density_series.x.empty()) {
          point_series.x = {density_series.x.front(), density_series.x.back()};
          point_series.y = {r.detection_f1, r.detection_f1};
          series.push_back(point_series);
        }
      write_png_rgb8(fs::path(bs_out) / "baseline_sweep.png", render_line_plot(series));
    }
    std::cout << csv;
  });

  // ablation
  auto* ablate = app.add_subcommand("ablation", "baseline / +PFA / +PFA+IC comparison table");
  ConfigArgs ablate_args;
  std::string seed_list = "0,1,2";
  add_config_flags(ablate, ablate_args);
  ablate->add_option("--seeds", seed_list, "Comma-separated seeds");
  ablate->callback([&] {
    const RunConfig c = load_run_config(ablate_args);
    const Dataset ds = read_dataset(c.dataset);
    const auto seeds = parse_list<std::uint64_t>(seed_list, "--seeds");
    std::cout << ablation_csv(run_ablation(c, ds, seeds, {log_step, nullptr}));
  });

  // render
  auto* render = app.add_subcommand("render", "Overlay class-colored dots on an image");
  std::string r_image, r_points, r_out;
  std::size_t r_classes = 4;
  double r_radius = 2.0;
  render->add_option("--image", r_image, "Input PNG")->required();
  render->add_option("--points", r_points, "Annotation or prediction JSON")->required();
  render->add_option("--out", r_out, "Output PNG")->required();
  render->add_option("--num-classes", r_classes, "Palette size");
  render->add_option("--radius", r_radius, "Dot radius in pixels");
  render->callback([&] {
    const Rgb8Image rgb = read_png_rgb8(r_image);
    const auto markers = markers_from_json(read_json_file(r_points), r_points);
    write_png_rgb8(r_out, render_overlay(rgb, markers, r_classes, r_radius));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << json{{"error", e.kind()}, {"message", e.what()}}.dump() << '\n';
  } catch (const fs::filesystem_error& e) {
    std::cerr << json{{"error", "io"}, {"message", e.what()}}.dump() << '\n';
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
  }
  return 1;
}
