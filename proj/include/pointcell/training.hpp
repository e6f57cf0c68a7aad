// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pointcell/backbone.hpp"
#include "pointcell/dataset.hpp"
#include "pointcell/density.hpp"
#include "pointcell/evaluation.hpp"
#include "pointcell/losses.hpp"
#include "pointcell/optim.hpp"
#include "pointcell/synthetic.hpp"

namespace pointcell {

enum class EvalMatcher { kGreedy, kHungarian };

struct DensityBaselineConfig {
  int kernel_size = 7;
  double sigma = 6.0;
  double w_bce = 0.8;
  double w_iou = 0.2;
  std::size_t head_channels = 32;
  double peak_threshold = 0.5;
  int min_distance = 3;
};

/// Everything a run needs; echoed to <output_dir>/config.json.
struct RunConfig {
  std::string dataset;
  std::string output_dir;
  BackboneConfig backbone;
  LossConfig loss;
  AugmentationConfig augmentation;
  bool augment = true;
  AdamWOptions optimizer;
  std::size_t epochs = 30;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  double eval_radius = 12.0;
  double detection_threshold = 0.5;
  EvalMatcher eval_matcher = EvalMatcher::kGreedy;
  std::size_t eval_every = 1;        // epochs between test evaluations; 0 = final only
  std::size_t checkpoint_every = 0;  // steps between checkpoints; 0 = end of each epoch
  DensityBaselineConfig density;

  void validate() const;
};

nlohmann::json run_config_to_json(const RunConfig& config);
/// Strict: unknown keys at any level raise ValidationError.
RunConfig run_config_from_json(const nlohmann::json& j);
/// Applies a dotted-path override such as "loss.q=0.1" or "backbone.pfa_enabled=false".
/// The value is parsed as JSON, falling back to a plain string.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Per-step loss row of the run log.
struct StepLog {
  std::size_t step = 0;
  std::size_t epoch = 0;
  LossBreakdown loss;
};

struct EpochLog {
  std::size_t epoch = 0;
  MetricsReport test;
  double elapsed_seconds = 0.0;
};

struct TrainCallbacks {
  std::function<void(const StepLog&)> on_step;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  std::vector<StepLog> steps;
  std::vector<EpochLog> epochs;
  MetricsReport final_test;
  double seconds = 0.0;
};

/// Number of optimizer steps per epoch for a training split of `n` images.
std::size_t steps_per_epoch(std::size_t n, std::size_t batch_size);

/// Trains `model` in place. Each step draws images in a per-epoch shuffled
/// order, augments them, runs the forward pass, matches proposals, backprops
/// the total loss and applies AdamW. The step -> (images, augmentation)
/// schedule depends only on (seed, step), so resuming from a checkpoint
/// replays the uninterrupted run. With a non-empty output_dir the config
/// echo, log.jsonl, checkpoint.ptck, metrics.json and timing.json are written.
/// Throws InfeasibleError naming the image when an image has more points
/// than anchors.
TrainResult train_point_model(const RunConfig& config, const Dataset& dataset, PointModel& model,
                              AdamWState& optimizer, const TrainCallbacks& callbacks = {});

/// Builds a fresh model from the config (optionally restoring a checkpoint)
/// and trains it.
struct TrainedPointModel {
  std::unique_ptr<PointModel> model;
  AdamWState optimizer;
  TrainResult result;
};
TrainedPointModel run_point_training(const RunConfig& config, const Dataset& dataset,
                                     const std::optional<std::filesystem::path>& resume = {},
                                     const TrainCallbacks& callbacks = {});

/// Forward pass, decode and threshold for one image.
ProposalSet infer_proposals(const PointModel& model, const AnnotatedImage& image);
std::vector<Prediction> predict_points(const PointModel& model, const AnnotatedImage& image,
                                       double threshold);

MetricsReport evaluate_point_model(const PointModel& model,
                                   const std::vector<const AnnotatedImage*>& images,
                                   double radius, double threshold,
                                   EvalMatcher matcher = EvalMatcher::kGreedy);

/// Mean wall-clock seconds per image over forward, decode and extraction.
/// Throws ContractError for an empty image list.
double time_inference(const PointModel& model, const std::vector<const AnnotatedImage*>& images,
                      double threshold);

struct TrainedDensityModel {
  std::unique_ptr<DensityModel> model;
  AdamWState optimizer;
  std::vector<double> losses;
};

/// Trains the density baseline against Gaussian reference maps with the
/// BCE+IoU loss; writes density_checkpoint.ptck and density_log.jsonl when
/// output_dir is set.
TrainedDensityModel run_density_training(const RunConfig& config, const Dataset& dataset,
                                         const std::function<void(std::size_t, double)>& on_step = {});
std::unique_ptr<DensityModel> make_density_model(const RunConfig& config);

/// Peaks become class-0 predictions; metrics use detection counts only.
std::vector<Prediction> peaks_to_predictions(const std::vector<Peak>& peaks);
MetricsReport evaluate_density_model(const DensityModel& model,
                                     const std::vector<const AnnotatedImage*>& images,
                                     const PeakParams& peaks, double radius,
                                     std::size_t num_classes);

}  // namespace pointcell
