// SPDX-License-Identifier: Apache-2.0
#include "pointcell/training.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <random>

#include "pointcell/checkpoint.hpp"
#include "pointcell/errors.hpp"
#include "pointcell/json_util.hpp"
#include "pointcell/matching.hpp"
#include "pointcell/ops.hpp"

namespace pointcell {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kShuffleStream = 0x5348'5546;
constexpr std::uint64_t kAugmentStream = 0x4155'474D;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

json backbone_to_json(const BackboneConfig& c) {
  json offsets = json::array();
  for (const auto& p : c.anchor_offsets) offsets.push_back({p.x, p.y});
  return {{"stage_channels", c.stage_channels},
          {"pfa_channels", c.pfa_channels},
          {"num_classes", c.num_classes},
          {"anchors_per_cell", c.anchors_per_cell},
          {"anchor_offsets", offsets},
          {"head_stride", c.head_stride},
          {"pfa_enabled", c.pfa_enabled},
          {"independent_classifier_enabled", c.independent_classifier_enabled}};
}

BackboneConfig backbone_from_json(const json& j) {
  const std::string ctx = "backbone";
  json_util::check_keys(j,
                        {"stage_channels", "pfa_channels", "num_classes", "anchors_per_cell",
                         "anchor_offsets", "head_stride", "pfa_enabled",
                         "independent_classifier_enabled"},
                        ctx);
  BackboneConfig c;
  json_util::read(j, "stage_channels", c.stage_channels, ctx);
  json_util::read(j, "pfa_channels", c.pfa_channels, ctx);
  json_util::read(j, "num_classes", c.num_classes, ctx);
  json_util::read(j, "anchors_per_cell", c.anchors_per_cell, ctx);
  json_util::read(j, "head_stride", c.head_stride, ctx);
  json_util::read(j, "pfa_enabled", c.pfa_enabled, ctx);
  json_util::read(j, "independent_classifier_enabled", c.independent_classifier_enabled, ctx);
  if (auto it = j.find("anchor_offsets"); it != j.end()) {
    std::vector<std::array<double, 2>> raw;
    json_util::read(j, "anchor_offsets", raw, ctx);
    c.anchor_offsets.clear();
    for (const auto& r : raw) c.anchor_offsets.push_back({r[0], r[1]});
  }
  return c;
}

json loss_to_json(const LossConfig& c) {
  return {{"alpha", c.alpha},
          {"beta", c.beta},
          {"gamma", c.gamma},
          {"q", c.q},
          {"lambda", c.lambda},
          {"regression_squared", c.regression_squared},
          {"classification_mean", c.classification_mean}};
}

LossConfig loss_from_json(const json& j) {
  const std::string ctx = "loss";
  json_util::check_keys(j,
                        {"alpha", "beta", "gamma", "q", "lambda", "regression_squared",
                         "classification_mean"},
                        ctx);
  LossConfig c;
  json_util::read(j, "alpha", c.alpha, ctx);
  json_util::read(j, "beta", c.beta, ctx);
  json_util::read(j, "gamma", c.gamma, ctx);
  json_util::read(j, "q", c.q, ctx);
  json_util::read(j, "lambda", c.lambda, ctx);
  json_util::read(j, "regression_squared", c.regression_squared, ctx);
  json_util::read(j, "classification_mean", c.classification_mean, ctx);
  return c;
}

json optimizer_to_json(const AdamWOptions& o) {
  return {{"lr", o.lr},
          {"weight_decay", o.weight_decay},
          {"beta1", o.beta1},
          {"beta2", o.beta2},
          {"eps", o.eps}};
}

AdamWOptions optimizer_from_json(const json& j) {
  const std::string ctx = "optimizer";
  json_util::check_keys(j, {"lr", "weight_decay", "beta1", "beta2", "eps"}, ctx);
  AdamWOptions o;
  json_util::read(j, "lr", o.lr, ctx);
  json_util::read(j, "weight_decay", o.weight_decay, ctx);
  json_util::read(j, "beta1", o.beta1, ctx);
  json_util::read(j, "beta2", o.beta2, ctx);
  json_util::read(j, "eps", o.eps, ctx);
  return o;
}

json density_to_json(const DensityBaselineConfig& d) {
  return {{"kernel_size", d.kernel_size},       {"sigma", d.sigma},
          {"w_bce", d.w_bce},                   {"w_iou", d.w_iou},
          {"head_channels", d.head_channels},   {"peak_threshold", d.peak_threshold},
          {"min_distance", d.min_distance}};
}

DensityBaselineConfig density_from_json(const json& j) {
  const std::string ctx = "density";
  json_util::check_keys(j,
                        {"kernel_size", "sigma", "w_bce", "w_iou", "head_channels",
                         "peak_threshold", "min_distance"},
                        ctx);
  DensityBaselineConfig d;
  json_util::read(j, "kernel_size", d.kernel_size, ctx);
  json_util::read(j, "sigma", d.sigma, ctx);
  json_util::read(j, "w_bce", d.w_bce, ctx);
  json_util::read(j, "w_iou", d.w_iou, ctx);
  json_util::read(j, "head_channels", d.head_channels, ctx);
  json_util::read(j, "peak_threshold", d.peak_threshold, ctx);
  json_util::read(j, "min_distance", d.min_distance, ctx);
  return d;
}

const char* matcher_name(EvalMatcher m) {
  return m == EvalMatcher::kGreedy ? "greedy" : "hungarian";
}

json step_row(const StepLog& s) {
  return {{"type", "step"},          {"step", s.step},         {"epoch", s.epoch},
          {"reg", s.loss.reg},       {"det", s.loss.det},      {"cls", s.loss.cls},
          {"total", s.loss.total}};
}

json summary_metrics(const MetricsReport& r) {
  json j = metrics_to_json(r);
  j.erase("matched_pairs");
  return j;
}

class LogWriter {
 public:
  LogWriter(const fs::path& path, bool append) {
    if (path.empty()) return;
    out_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!out_) throw IoError("cannot open log " + path.string());
  }
  void write(const json& row) {
    if (!out_.is_open()) return;
    out_ << row.dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

void check_split_classes(const std::vector<const AnnotatedImage*>& images, std::size_t classes) {
  for (const auto* img : images)
    for (const auto& p : img->points)
      if (p.class_id < 0 || static_cast<std::size_t>(p.class_id) >= classes)
        throw ValidationError("image " + img->id + ": class " + std::to_string(p.class_id) +
                              " outside backbone.num_classes = " + std::to_string(classes));
}

// Image indices for global step `step`: position in a per-epoch permutation.
std::vector<std::size_t> batch_indices(std::uint64_t seed, std::size_t n, std::size_t batch,
                                       std::size_t step) {
  const std::size_t per_epoch = steps_per_epoch(n, batch);
  const std::size_t epoch = step / per_epoch;
  const std::size_t pos = step % per_epoch;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(derive_seed(seed, kShuffleStream), epoch));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> out;
  for (std::size_t k = pos * batch; k < std::min(n, (pos + 1) * batch); ++k)
    out.push_back(order[k]);
  return out;
}

AnnotatedImage training_view(const RunConfig& config, const AnnotatedImage& image,
                             std::size_t step, std::size_t slot) {
  if (!config.augment) return image;
  const std::uint64_t s = derive_seed(derive_seed(config.seed, kAugmentStream),
                                      step * config.batch_size + slot);
  return augment(image, config.augmentation, s);
}

}  // namespace

void RunConfig::validate() const {
  backbone.validate();
  loss.validate();
  augmentation.validate();
  if (!(optimizer.lr >= 0.0)) throw ValidationError("optimizer.lr must be >= 0");
  if (!(optimizer.weight_decay >= 0.0))
    throw ValidationError("optimizer.weight_decay must be >= 0");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0))
    throw ValidationError("optimizer.beta1 must lie in [0, 1)");
  if (!(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0))
    throw ValidationError("optimizer.beta2 must lie in [0, 1)");
  if (!(optimizer.eps > 0.0)) throw ValidationError("optimizer.eps must be > 0");
  if (batch_size == 0) throw ValidationError("batch_size must be >= 1");
  if (!(eval_radius > 0.0)) throw ValidationError("eval_radius must be > 0");
  if (!(detection_threshold >= 0.0 && detection_threshold < 1.0))
    throw ValidationError("detection_threshold must lie in [0, 1)");
  if (density.kernel_size < 1 || density.kernel_size % 2 == 0)
    throw ValidationError("density.kernel_size must be a positive odd integer");
  if (!(density.sigma > 0.0)) throw ValidationError("density.sigma must be > 0");
  if (density.head_channels == 0) throw ValidationError("density.head_channels must be >= 1");
  PeakParams{density.min_distance, density.peak_threshold}.validate();
}

json run_config_to_json(const RunConfig& c) {
  return {{"dataset", c.dataset},
          {"output_dir", c.output_dir},
          {"backbone", backbone_to_json(c.backbone)},
          {"loss", loss_to_json(c.loss)},
          {"augmentation", augmentation_config_to_json(c.augmentation)},
          {"augment", c.augment},
          {"optimizer", optimizer_to_json(c.optimizer)},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"eval_radius", c.eval_radius},
          {"detection_threshold", c.detection_threshold},
          {"eval_matcher", matcher_name(c.eval_matcher)},
          {"eval_every", c.eval_every},
          {"checkpoint_every", c.checkpoint_every},
          {"density", density_to_json(c.density)}};
}

RunConfig run_config_from_json(const json& j) {
  const std::string ctx = "config";
  json_util::check_keys(j,
                        {"dataset", "output_dir", "backbone", "loss", "augmentation", "augment",
                         "optimizer", "epochs", "batch_size", "seed", "eval_radius",
                         "detection_threshold", "eval_matcher", "eval_every",
                         "checkpoint_every", "density"},
                        ctx);
  RunConfig c;
  json_util::read(j, "dataset", c.dataset, ctx);
  json_util::read(j, "output_dir", c.output_dir, ctx);
  if (j.contains("backbone")) c.backbone = backbone_from_json(j["backbone"]);
  if (j.contains("loss")) c.loss = loss_from_json(j["loss"]);
  if (j.contains("augmentation")) c.augmentation = augmentation_config_from_json(j["augmentation"]);
  json_util::read(j, "augment", c.augment, ctx);
  if (j.contains("optimizer")) c.optimizer = optimizer_from_json(j["optimizer"]);
  json_util::read(j, "epochs", c.epochs, ctx);
  json_util::read(j, "batch_size", c.batch_size, ctx);
  json_util::read(j, "seed", c.seed, ctx);
  json_util::read(j, "eval_radius", c.eval_radius, ctx);
  json_util::read(j, "detection_threshold", c.detection_threshold, ctx);
  json_util::read(j, "eval_every", c.eval_every, ctx);
  json_util::read(j, "checkpoint_every", c.checkpoint_every, ctx);
  if (j.contains("eval_matcher")) {
    std::string m;
    json_util::read(j, "eval_matcher", m, ctx);
    if (m == "greedy")
      c.eval_matcher = EvalMatcher::kGreedy;
    else if (m == "hungarian")
      c.eval_matcher = EvalMatcher::kHungarian;
    else
      throw ValidationError("config.eval_matcher: expected 'greedy' or 'hungarian', got '" + m +
                            "'");
  }
  if (j.contains("density")) c.density = density_from_json(j["density"]);
  c.validate();
  return c;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ValidationError("--set expects key=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ValidationError("--set: empty key segment in '" + path + "'");
    if (!node->is_object()) throw ValidationError("--set: '" + path + "' crosses a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

std::size_t steps_per_epoch(std::size_t n, std::size_t batch_size) {
  if (batch_size == 0) throw ContractError("steps_per_epoch: batch_size must be >= 1");
  return (n + batch_size - 1) / batch_size;
}

ProposalSet infer_proposals(const PointModel& model, const AnnotatedImage& raw) {
  const std::size_t stride = model.config().encoder_stride();
  const bool aligned = raw.height % stride == 0 && raw.width % stride == 0;
  const AnnotatedImage padded = aligned ? AnnotatedImage{} : pad_to_multiple(raw, stride);
  const AnnotatedImage& image = aligned ? raw : padded;
  Tape tape;
  Var input = tape.constant(image_tensor(image.pixels, image.height, image.width));
  const AnchorGrid grid = build_anchor_grid(image.height, image.width, model.config());
  return to_proposal_set(model.forward(tape, input, grid));
}

std::vector<Prediction> predict_points(const PointModel& model, const AnnotatedImage& image,
                                       double threshold) {
  return extract_predictions(infer_proposals(model, image), threshold);
}

MetricsReport evaluate_point_model(const PointModel& model,
                                   const std::vector<const AnnotatedImage*>& images,
                                   double radius, double threshold, EvalMatcher matcher) {
  if (!(radius > 0.0)) throw ValidationError("radius must be > 0");
  MetricsAccumulator acc(model.config().num_classes);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto preds = predict_points(model, *images[i], threshold);
    const GroundTruthSet gt = images[i]->ground_truth();
    const RadiusMatch m = matcher == EvalMatcher::kGreedy
                              ? greedy_match(preds, gt, radius)
                              : hungarian_radius_match(preds, gt, radius);
    acc.add(compute_metrics(m, preds, gt, model.config().num_classes), i);
  }
  return acc.finish();
}

double time_inference(const PointModel& model, const std::vector<const AnnotatedImage*>& images,
                      double threshold) {
  if (images.empty()) throw ContractError("time_inference: no images");
  const auto start = Clock::now();
  for (const auto* img : images) predict_points(model, *img, threshold);
  return seconds_since(start) / static_cast<double>(images.size());
}

TrainResult train_point_model(const RunConfig& config, const Dataset& dataset, PointModel& model,
                              AdamWState& optimizer, const TrainCallbacks& callbacks) {
  config.validate();
  const auto train = dataset.split("train");
  const auto test = dataset.split("test");
  if (train.empty()) throw ValidationError("training split is empty");
  check_split_classes(train, config.backbone.num_classes);
  check_split_classes(test, config.backbone.num_classes);

  const fs::path out = config.output_dir;
  const bool resuming = optimizer.step > 0;
  if (!out.empty()) {
    fs::create_directories(out);
    write_json_file(out / "config.json", run_config_to_json(config));
  }
  LogWriter log(out.empty() ? fs::path{} : out / "log.jsonl", resuming);

  const std::size_t per_epoch = steps_per_epoch(train.size(), config.batch_size);
  const std::size_t total_steps = per_epoch * config.epochs;
  const double inv_batch = 1.0 / static_cast<double>(config.batch_size);
  ParameterStore& params = model.parameters();

  TrainResult result;
  const auto start = Clock::now();
  auto save = [&] {
    if (!out.empty()) save_checkpoint(out / "checkpoint.ptck", params, &optimizer);
  };

  for (std::size_t step = optimizer.step; step < total_steps; ++step) {
    const std::size_t epoch = step / per_epoch;
    params.zero_grad();
    StepLog row{step, epoch, {}};
    const auto indices = batch_indices(config.seed, train.size(), config.batch_size, step);
    for (std::size_t slot = 0; slot < indices.size(); ++slot) {
      const AnnotatedImage view = training_view(config, *train[indices[slot]], step, slot);
      const GroundTruthSet gt = view.ground_truth();
      Tape tape;
      Var input = tape.constant(image_tensor(view.pixels, view.height, view.width));
      const AnchorGrid grid = build_anchor_grid(view.height, view.width, config.backbone);
      if (grid.size() < gt.size())
        throw InfeasibleError("image " + view.id + ": " + std::to_string(gt.size()) +
                              " points exceed " + std::to_string(grid.size()) + " anchors");
      const ProposalVars proposals = model.forward(tape, input, grid);
      const MatchResult assignment = match(to_proposal_set(proposals), gt, config.loss.alpha);
      const LossTerms terms = compute_losses(proposals, gt, assignment, config.loss);
      tape.backward(ops::scale(terms.total, inv_batch));
      row.loss.reg += terms.values.reg * inv_batch;
      row.loss.det += terms.values.det * inv_batch;
      row.loss.cls += terms.values.cls * inv_batch;
      row.loss.total += terms.values.total * inv_batch;
    }
    adamw_step(params, optimizer);
    log.write(step_row(row));
    if (callbacks.on_step) callbacks.on_step(row);
    result.steps.push_back(row);

    const bool epoch_end = (step + 1) % per_epoch == 0;
    if (config.checkpoint_every > 0 ? (step + 1) % config.checkpoint_every == 0 : epoch_end)
      save();
    if (epoch_end && config.eval_every > 0 && (epoch + 1) % config.eval_every == 0 &&
        !test.empty()) {
      EpochLog e{epoch, evaluate_point_model(model, test, config.eval_radius,
                                             config.detection_threshold, config.eval_matcher),
                 seconds_since(start)};
      log.write({{"type", "epoch"},
                 {"epoch", e.epoch},
                 {"test", summary_metrics(e.test)},
                 {"elapsed_seconds", e.elapsed_seconds}});
      if (callbacks.on_epoch) callbacks.on_epoch(e);
      result.epochs.push_back(std::move(e));
    }
  }
  save();
  result.seconds = seconds_since(start);

  result.final_test = evaluate_point_model(model, test, config.eval_radius,
                                           config.detection_threshold, config.eval_matcher);
  log.write({{"type", "final"}, {"step", total_steps}, {"test", summary_metrics(result.final_test)}});
  if (!out.empty()) {
    json metrics = metrics_to_json(result.final_test);
    metrics["split"] = "test";
    metrics["radius"] = config.eval_radius;
    metrics["threshold"] = config.detection_threshold;
    metrics["pfa_enabled"] = config.backbone.pfa_enabled;
    metrics["independent_classifier_enabled"] = config.backbone.independent_classifier_enabled;
    write_json_file(out / "metrics.json", metrics);
    json timing = {{"train_seconds", result.seconds}};
    if (!test.empty())
      timing["inference_seconds_per_image"] =
          time_inference(model, test, config.detection_threshold);
    write_json_file(out / "timing.json", timing);
  }
  return result;
}

TrainedPointModel run_point_training(const RunConfig& config, const Dataset& dataset,
                                     const std::optional<fs::path>& resume,
                                     const TrainCallbacks& callbacks) {
  config.validate();
  TrainedPointModel t;
  t.model = std::make_unique<PointModel>(config.backbone, config.seed);
  t.optimizer = AdamWState::init(t.model->parameters(), config.optimizer);
  if (resume) {
    load_checkpoint(*resume, t.model->parameters(), &t.optimizer);
    t.optimizer.options = config.optimizer;
  }
  t.result = train_point_model(config, dataset, *t.model, t.optimizer, callbacks);
  return t;
}

std::unique_ptr<DensityModel> make_density_model(const RunConfig& config) {
  return std::make_unique<DensityModel>(config.backbone,
                                        DensityHeadConfig{config.density.head_channels},
                                        config.seed);
}

TrainedDensityModel run_density_training(const RunConfig& config, const Dataset& dataset,
                                         const std::function<void(std::size_t, double)>& on_step) {
  config.validate();
  const auto train = dataset.split("train");
  if (train.empty()) throw ValidationError("training split is empty");

  TrainedDensityModel t;
  t.model = make_density_model(config);
  t.optimizer = AdamWState::init(t.model->parameters(), config.optimizer);
  ParameterStore& params = t.model->parameters();

  const fs::path out = config.output_dir;
  if (!out.empty()) {
    fs::create_directories(out);
    write_json_file(out / "config.json", run_config_to_json(config));
  }
  LogWriter log(out.empty() ? fs::path{} : out / "density_log.jsonl", false);

  const std::size_t per_epoch = steps_per_epoch(train.size(), config.batch_size);
  const std::size_t total_steps = per_epoch * config.epochs;
  const double inv_batch = 1.0 / static_cast<double>(config.batch_size);
  for (std::size_t step = 0; step < total_steps; ++step) {
    params.zero_grad();
    double loss = 0.0;
    const auto indices = batch_indices(config.seed, train.size(), config.batch_size, step);
    for (std::size_t slot = 0; slot < indices.size(); ++slot) {
      const AnnotatedImage view = training_view(config, *train[indices[slot]], step, slot);
      const DensityMap target = make_rdm(view.ground_truth(), view.height, view.width,
                                         config.density.kernel_size, config.density.sigma);
      Tensor target_tensor({1, 1, view.height, view.width}, target.values);
      Tape tape;
      Var input = tape.constant(image_tensor(view.pixels, view.height, view.width));
      Var l = bce_iou_loss(t.model->forward(tape, input), target_tensor, config.density.w_bce,
                           config.density.w_iou);
      tape.backward(ops::scale(l, inv_batch));
      loss += l.item() * inv_batch;
    }
    adamw_step(params, t.optimizer);
    t.losses.push_back(loss);
    log.write({{"type", "step"}, {"step", step}, {"epoch", step / per_epoch}, {"loss", loss}});
    if (on_step) on_step(step, loss);
  }
  if (!out.empty()) save_checkpoint(out / "density_checkpoint.ptck", params, &t.optimizer);
  return t;
}

std::vector<Prediction> peaks_to_predictions(const std::vector<Peak>& peaks) {
  std::vector<Prediction> preds;
  preds.reserve(peaks.size());
  for (const auto& p : peaks) preds.push_back({p.x, p.y, p.score, 0});
  return preds;
}

MetricsReport evaluate_density_model(const DensityModel& model,
                                     const std::vector<const AnnotatedImage*>& images,
                                     const PeakParams& peaks, double radius,
                                     std::size_t num_classes) {
  if (!(radius > 0.0)) throw ValidationError("radius must be > 0");
  peaks.validate();
  MetricsAccumulator acc(num_classes);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const AnnotatedImage& img = *images[i];
    const DensityMap map = model.predict(image_tensor(img.pixels, img.height, img.width));
    const auto preds = peaks_to_predictions(find_peaks(map, peaks));
    const GroundTruthSet gt = img.ground_truth();
    acc.add(compute_metrics(greedy_match(preds, gt, radius), preds, gt, num_classes), i);
  }
  return acc.finish();
}

}  // namespace pointcell
