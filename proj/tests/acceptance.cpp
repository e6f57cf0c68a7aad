// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pointcell/dataset.hpp"
#include "pointcell/evaluation.hpp"
#include "pointcell/experiments.hpp"
#include "pointcell/grad_check.hpp"
#include "pointcell/losses.hpp"
#include "pointcell/matching.hpp"
#include "pointcell/ops.hpp"
#include "pointcell/training.hpp"

namespace fs = std::filesystem;
using namespace pointcell;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Settings {
  fs::path work;
  std::string cli;
  std::size_t learn_epochs = 60;
  std::size_t sweep_epochs = 60;
  std::size_t ablation_epochs = 15;
  std::size_t density_epochs = 6;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << std::fixed << v;
  return os.str();
}

void progress(const std::string& text) { std::cerr << "  .. " << text << std::endl; }

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

TrainCallbacks epoch_progress(const std::string& tag) {
  TrainCallbacks cb;
  cb.on_epoch = [tag](const EpochLog& e) {
    progress(tag + " epoch " + std::to_string(e.epoch) + " det " + fmt(e.test.detection.f1) +
             " cls " + fmt(e.test.classification_macro.f1));
  };
  return cb;
}

// Toy dataset: 200 images, 64x64, C=2, 3-8 cells, separation 14 px.
GeneratorConfig toy_generator(double noise = 0.0, double separation = 14.0) {
  GeneratorConfig g;
  g.height = g.width = 64;
  g.num_classes = 2;
  g.cell_count_range = {3, 8};
  g.min_separation = separation;
  g.label_noise_rate = noise;
  g.count = 200;
  g.seed = 0;
  return g;
}

// ---------------------------------------------------------------------------

double brute_force_min(const CostMatrix& c) {
  std::vector<std::size_t> rows(c.rows);
  std::iota(rows.begin(), rows.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t j = 0; j < c.cols; ++j) total += c.at(rows[j], j);
    best = std::min(best, total);
  } while (std::next_permutation(rows.begin(), rows.end()));
  return best;
}

Outcome criterion1(const Settings&) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  const auto start = Clock::now();
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 1 + rng() % 6;
    const std::size_t n = rng() % (m + 1);
    CostMatrix c{m, n, 0.0, std::vector<double>(m * n)};
    for (double& v : c.values) v = u(rng);
    const MatchResult r = solve_assignment(c);
    r.validate();
    if (n > 0 && assignment_cost(c, r) != brute_force_min(c)) ++mismatches;
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && secs < 10.0,
          "1000 matrices, " + std::to_string(mismatches) + " mismatches, " + fmt(secs, 2) + " s"};
}

// ---------------------------------------------------------------------------

Outcome criterion2(const Settings&) {
  const auto start = Clock::now();
  const double eps = 1e-6;
  double worst = 0.0;
  std::ostringstream notes;

  // Individual losses on proposals built from raw tensors.
  std::mt19937_64 rng(2);
  auto random = [&](Shape s, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t = Tensor::zeros(std::move(s));
    for (double& v : t.data) v = u(rng);
    return t;
  };
  const std::size_t m = 8, c = 3;
  Tensor coords = random({m, 2}, 0.0, 64.0);
  Tensor obj_logits = random({m, 2}, -2.0, 2.0);
  Tensor cls_logits = random({m, c}, -2.0, 2.0);
  GroundTruthSet g;
  g.coords = {{12, 20}, {40, 8}, {50, 50}, {20, 44}};
  g.classes = {0, 2, 1, 1};
  const LossConfig cfg;
  auto build = [](Var xy, Var ol, Var cl) {
    return ProposalVars{xy, ops::softmax(ol, 1), ops::softmax(cl, 1)};
  };
  Tape t0;
  const ProposalSet detached = to_proposal_set(
      build(t0.constant(coords), t0.constant(obj_logits), t0.constant(cls_logits)));
  const MatchResult r = match(detached, g, cfg.alpha);

  auto record = [&](const std::string& name, double e) {
    worst = std::max(worst, e);
    notes << name << " " << std::scientific << std::setprecision(1) << e << "; ";
  };
  record("reg", grad_check([&](Tape&, Var xy) { return regression_loss(xy, g, r); }, coords, eps));
  record("det", grad_check([&](Tape&, Var ol) { return detection_loss(ops::softmax(ol, 1), r, cfg.beta); },
                           obj_logits, eps));
  record("cls", grad_check([&](Tape&, Var cl) {
           return classification_loss(ops::softmax(cl, 1), g, r, cfg);
         }, cls_logits, eps));
  double total_err = 0.0;
  for (Tensor* target : {&coords, &obj_logits, &cls_logits}) {
    total_err = std::max(total_err, grad_check_tensor(
                                        [&](Tape& t) {
                                          auto var = [&](Tensor& x) {
                                            return &x == target ? t.leaf(x) : t.constant(x);
                                          };
                                          return compute_losses(build(var(coords), var(obj_logits),
                                                                      var(cls_logits)),
                                                                g, r, cfg)
                                              .total;
                                        },
                                        *target, eps));
  }
  record("total", total_err);

  // Full model loss on a 64x64 image, matching recomputed at every evaluation.
  PointModel model(BackboneConfig{}, 5);
  const AnnotatedImage img = generate_image(toy_generator(), 0);
  const GroundTruthSet gt = img.ground_truth();
  Tensor image = image_tensor(img.pixels, img.height, img.width);
  const AnchorGrid grid = build_anchor_grid(64, 64, model.config());
  ParameterStore& params = model.parameters();
  for (auto& entry : params) entry.tensor.requires_grad = false;
  auto full_loss = [&](Tape& t, Var input) {
    const ProposalVars pv = model.forward(t, input, grid);
    return compute_losses(pv, gt, match(to_proposal_set(pv), gt, cfg.alpha), cfg).total;
  };
  double model_err = 0.0;
  std::size_t checked = 0;
  for (auto& entry : params) {
    Tensor& w = entry.tensor;
    std::vector<std::size_t> picks;
    for (int k = 0; k < 3; ++k) picks.push_back(rng() % w.numel());
    model_err = std::max(model_err, grad_check_tensor(
                                        [&](Tape& t) { return full_loss(t, t.constant(image)); },
                                        w, eps, picks));
    checked += picks.size();
  }
  std::vector<std::size_t> pixels;
  for (int k = 0; k < 60; ++k) pixels.push_back(rng() % image.numel());
  model_err = std::max(model_err, grad_check(full_loss, image, eps, pixels));
  checked += pixels.size();
  record("model(" + std::to_string(checked) + " coords)", model_err);

  const double secs = seconds_since(start);
  notes << "max " << worst << " (< 1e-4), " << fmt(secs, 1) << " s";
  return {worst < 1e-4 && secs < 300.0, notes.str()};
}

// ---------------------------------------------------------------------------

Outcome criterion3(const Settings&) {
  ProposalSet ps;
  ps.coords = {{0, 0}, {1, 1}};
  ps.p_obj = {0.5, 0.5};
  ps.p_bkg = {0.5, 0.5};
  ps.num_classes = 2;
  ps.class_probs = {0.5, 0.5, 0.5, 0.5};
  MatchResult r;
  r.num_proposals = 2;
  r.delta = {0};
  r.negatives = {1};
  const double det = detection_loss(ps, r, 0.6);
  const std::vector<double> uniform(4, 0.25), onehot{0.0, 0.0, 1.0, 0.0};
  const double gce = gce_l2_loss(uniform, 1, 0.4, 0.1);
  const double hot = gce_l2_loss(onehot, 2, 0.4, 0.1);
  const DensityMap half{8, 8, std::vector<double>(64, 0.5)};
  const double bce = bce_iou_loss(half, half);
  const bool ok = std::fabs(det - 0.554518) <= 1e-6 && std::fabs(gce - 1.114127) <= 1e-6 &&
                  hot == 0.1 && std::fabs(bce - 0.687851) <= 1e-6;
  return {ok, "detection " + fmt(det, 7) + ", gce_l2 " + fmt(gce, 7) + ", one-hot " +
                  fmt(hot, 7) + ", bce_iou " + fmt(bce, 7)};
}

// ---------------------------------------------------------------------------

Outcome criterion4(const Settings&) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.02, 1.0);
  double worst_rel = 0.0;
  bool exact = true;
  for (int t = 0; t < 500; ++t) {
    const std::size_t c = 2 + rng() % 5;
    std::vector<double> p(c);
    double s = 0.0;
    for (double& v : p) s += (v = u(rng));
    for (double& v : p) v /= s;
    const int label = static_cast<int>(rng() % c);
    double sq = 0.0;
    for (double v : p) sq += v * v;
    const double norm = std::sqrt(sq);
    const double ce = -std::log(p[label]) + 0.1 * norm;
    worst_rel = std::max(worst_rel, std::fabs(gce_l2_loss(p, label, 1e-4, 0.1) - ce) / ce);
    exact = exact && gce_l2_loss(p, label, 1.0, 0.1) == (1.0 - p[label]) + 0.1 * norm;
  }
  return {worst_rel < 1e-3 && exact, "500 distributions, q=1e-4 max relative deviation " +
                                         std::to_string(worst_rel) +
                                         (exact ? ", q=1 exact" : ", q=1 NOT exact")};
}

// ---------------------------------------------------------------------------

Outcome criterion5(const Settings& s) {
  std::ostringstream detail;
  // Overfit a single image first.
  {
    Dataset one = generate_dataset(toy_generator());
    const AnnotatedImage img = one.images[0];
    one.images = {img};
    one.train_ids = one.test_ids = {img.id};
    RunConfig cfg;
    cfg.augment = false;
    cfg.eval_every = 0;
    cfg.epochs = 300;
    const auto t = run_point_training(cfg, one);
    const double f1 = t.result.final_test.detection.f1;
    const double cf1 = t.result.final_test.classification_macro.f1;
    detail << "overfit-one det F1 " << fmt(f1) << " cls F1 " << fmt(cf1) << "; ";
    if (f1 != 1.0) return {false, detail.str()};
  }
  const Dataset ds = generate_dataset(toy_generator());
  RunConfig cfg;
  cfg.epochs = s.learn_epochs;
  cfg.eval_every = 10;
  const auto start = Clock::now();
  const auto t = run_point_training(cfg, ds, {}, epoch_progress("learnability"));
  const double secs = seconds_since(start);
  const double det = t.result.final_test.detection.f1;
  const double cls = t.result.final_test.classification_macro.f1;
  detail << s.learn_epochs << " epochs, test det F1 " << fmt(det) << " (>= 0.85), cls F1 "
         << fmt(cls) << " (>= 0.80), " << fmt(secs / 60.0, 1) << " min (< 30)";
  return {det >= 0.85 && cls >= 0.80 && secs < 1800.0, detail.str()};
}

// ---------------------------------------------------------------------------

Outcome criterion6(const Settings& s) {
  const Dataset ds = generate_dataset(toy_generator(0.2));
  RunConfig cfg;
  cfg.epochs = s.sweep_epochs;
  cfg.eval_every = 0;
  cfg.output_dir = (s.work / "q_sweep").string();
  const std::vector<double> qs{0.1, 0.25, 0.4, 0.6, 0.9};
  TrainCallbacks cb;
  const auto rows = sweep_q(cfg, ds, qs, cb);
  std::size_t best = 0;
  std::ostringstream detail;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].classification_f1 > rows[best].classification_f1) best = i;
    detail << "q=" << rows[i].q << " cls " << fmt(rows[i].classification_f1) << "; ";
    progress("q=" + fmt(rows[i].q, 2) + " det " + fmt(rows[i].detection_f1) + " cls " +
             fmt(rows[i].classification_f1));
  }
  const bool direction = rows[2].classification_f1 >= rows[0].classification_f1;
  const bool interior = best != 0 && best != rows.size() - 1;
  detail << "argmax q=" << rows[best].q << ", CSV " << (fs::path(cfg.output_dir) / "q_sweep.csv").string();
  return {direction && interior && fs::exists(fs::path(cfg.output_dir) / "q_sweep.csv"),
          detail.str()};
}

// ---------------------------------------------------------------------------

Outcome criterion7(const Settings& s) {
  const Dataset ds = generate_dataset(toy_generator(0.0, 8.0));
  RunConfig cfg;
  cfg.epochs = s.density_epochs;
  cfg.eval_every = 0;
  const auto density = run_density_training(cfg, ds, [](std::size_t step, double loss) {
    if (step % 200 == 0) progress("density step " + std::to_string(step) + " loss " + fmt(loss));
  });
  RunConfig point_cfg = cfg;
  point_cfg.epochs = 3;
  const auto point = run_point_training(point_cfg, ds);
  const std::vector<int> distances{3, 6, 12, 24};
  const auto rows = baseline_sweep(*density.model, point.model.get(), ds.split("test"), distances,
                                   cfg.density.peak_threshold, cfg.eval_radius,
                                   cfg.detection_threshold, 2);
  fs::create_directories(s.work);
  write_text_file(s.work / "baseline_sweep.csv", baseline_sweep_csv(rows));
  double lo = 1.0, hi = 0.0;
  std::size_t point_rows = 0;
  std::ostringstream detail;
  for (const auto& r : rows) {
    if (r.method == "density") {
      lo = std::min(lo, r.detection_f1);
      hi = std::max(hi, r.detection_f1);
      detail << "md=" << *r.min_distance << " F1 " << fmt(r.detection_f1) << "; ";
    } else {
      ++point_rows;
      detail << "point F1 " << fmt(r.detection_f1) << " (no min_distance); ";
    }
  }
  detail << "density spread " << fmt(100.0 * (hi - lo), 1) << " pp (> 5)";
  return {hi - lo > 0.05 && point_rows == 1 && !rows.back().min_distance.has_value(),
          detail.str()};
}

// ---------------------------------------------------------------------------

Outcome criterion8(const Settings&) {
  auto gt_of = [](std::vector<Point2> c, std::vector<int> k) {
    GroundTruthSet g;
    g.coords = std::move(c);
    g.classes = std::move(k);
    return g;
  };
  auto score = [](const std::vector<Prediction>& p, const GroundTruthSet& g) {
    return compute_metrics(greedy_match(p, g, 12.0), p, g, 2);
  };
  const GroundTruthSet one = gt_of({{20, 20}}, {0});
  const auto far = score({{33, 20, 0.9, 0}}, one);
  const auto edge = score({{32, 20, 0.9, 0}}, one);
  const auto dup = score({{20, 20, 0.9, 0}, {21, 20, 0.8, 0}}, one);
  const bool fixtures = far.detection.tp == 0 && far.detection.fp == 1 && far.detection.fn == 1 &&
                        edge.detection.tp == 1 && edge.detection.fp == 0 &&
                        dup.detection.tp == 1 && dup.detection.fp == 1 && dup.detection.fn == 0;

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> pos(0.0, 64.0), sc(0.0, 1.0);
  std::size_t violations = 0;
  for (int scene = 0; scene < 10000; ++scene) {
    const std::size_t n = rng() % 10, k = rng() % 14;
    GroundTruthSet g;
    for (std::size_t j = 0; j < n; ++j) {
      g.coords.push_back({pos(rng), pos(rng)});
      g.classes.push_back(static_cast<int>(rng() % 2));
    }
    std::vector<Prediction> preds;
    for (std::size_t i = 0; i < k; ++i)
      preds.push_back({pos(rng), pos(rng), sc(rng), static_cast<int>(rng() % 2)});
    const auto rep = score(preds, g);
    if (rep.detection.tp + rep.detection.fn != n || rep.detection.tp + rep.detection.fp != k)
      ++violations;
  }
  return {fixtures && violations == 0,
          std::string("radius/duplicate fixtures ") + (fixtures ? "ok" : "FAILED") +
              ", 10000 scenes, " + std::to_string(violations) + " conservation violations"};
}

// ---------------------------------------------------------------------------

int run_cli(const Settings& s, const std::string& args) {
  const std::string cmd = "\"" + s.cli + "\" " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

fs::path toy_dataset_on_disk(const Settings& s) {
  const fs::path dir = s.work / "toy_dataset";
  if (!fs::exists(dir / "manifest.json")) write_dataset(generate_dataset(toy_generator()), dir);
  return dir;
}

Outcome criterion9(const Settings& s) {
  if (s.cli.empty()) return {false, "no CLI path given (--cli)"};
  GeneratorConfig g = toy_generator();
  g.count = 20;
  const fs::path data = s.work / "determinism_dataset";
  fs::remove_all(data);
  write_dataset(generate_dataset(g), data);
  const fs::path a = s.work / "determinism_a", b = s.work / "determinism_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const std::string common = "train --dataset \"" + data.string() + "\" --epochs 2 --seed 7 ";
  if (run_cli(s, common + "--output-dir \"" + a.string() + "\"") != 0 ||
      run_cli(s, common + "--output-dir \"" + b.string() + "\"") != 0)
    return {false, "train command failed"};
  const bool ckpt = slurp(a / "checkpoint.ptck") == slurp(b / "checkpoint.ptck");
  const bool metrics = slurp(a / "metrics.json") == slurp(b / "metrics.json");
  const bool nonempty = !slurp(a / "checkpoint.ptck").empty();
  return {ckpt && metrics && nonempty,
          std::string("checkpoint ") + (ckpt ? "identical" : "DIFFERS") + ", metrics.json " +
              (metrics ? "identical" : "DIFFERS")};
}

// ---------------------------------------------------------------------------

Outcome criterion10(const Settings& s) {
  if (s.cli.empty()) return {false, "no CLI path given (--cli)"};
  const fs::path data = toy_dataset_on_disk(s);
  std::vector<AblationRow> rows{{"baseline", false, false, {}, {}, {}},
                                {"+PFA", true, false, {}, {}, {}},
                                {"+PFA+IC", true, true, {}, {}, {}}};
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::uint64_t seed : {0, 1, 2}) {
      const fs::path out = s.work / ("ablation_" + std::to_string(r) + "_seed_" + std::to_string(seed));
      fs::remove_all(out);
      const std::string flags =
          std::string("--set backbone.pfa_enabled=") + (rows[r].pfa_enabled ? "true" : "false") +
          " --set backbone.independent_classifier_enabled=" +
          (rows[r].independent_classifier_enabled ? "true" : "false");
      if (run_cli(s, "train --dataset \"" + data.string() + "\" --output-dir \"" + out.string() +
                         "\" --epochs " + std::to_string(s.ablation_epochs) + " --seed " +
                         std::to_string(seed) + " --set eval_every=0 " + flags) != 0)
        return {false, "train failed for " + rows[r].name + " seed " + std::to_string(seed)};
      const auto m = read_json_file(out / "metrics.json");
      if (m["pfa_enabled"] != rows[r].pfa_enabled ||
          m["independent_classifier_enabled"] != rows[r].independent_classifier_enabled)
        return {false, "metrics.json flags do not match the requested configuration"};
      rows[r].seeds.push_back(seed);
      rows[r].detection_f1.push_back(m["detection"]["f1"].get<double>());
      rows[r].classification_f1.push_back(m["classification_macro"]["f1"].get<double>());
      progress(rows[r].name + " seed " + std::to_string(seed) + " det " +
               fmt(rows[r].detection_f1.back()) + " cls " + fmt(rows[r].classification_f1.back()));
    }
  const std::string csv = ablation_csv(rows);
  write_text_file(s.work / "ablation.csv", csv);
  const auto lines = std::count(csv.begin(), csv.end(), '\n');
  std::ostringstream detail;
  for (const auto& r : rows)
    detail << r.name << " det " << fmt(r.mean_detection_f1()) << " cls "
           << fmt(r.mean_classification_f1()) << "; ";
  detail << "table rows " << lines - 1;
  return {lines == 4 && rows[1].mean_detection_f1() >= rows[0].mean_detection_f1(), detail.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pointcell acceptance suite"};
  std::vector<int> selected;
  Settings s;
  std::string work = (fs::temp_directory_path() / "pointcell_acceptance").string();
  app.add_option("--criteria", selected, "Criteria to run (default: all)")->delimiter(',');
  app.add_option("--cli", s.cli, "Path to the pointcell executable");
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--learn-epochs", s.learn_epochs, "Epochs for the learnability run");
  app.add_option("--sweep-epochs", s.sweep_epochs, "Epochs per q-sweep run");
  app.add_option("--ablation-epochs", s.ablation_epochs, "Epochs per ablation run");
  app.add_option("--density-epochs", s.density_epochs, "Epochs for the density baseline");
  CLI11_PARSE(app, argc, argv);
  s.work = work;
  fs::create_directories(s.work);

  const std::map<int, std::pair<std::string, std::function<Outcome(const Settings&)>>> criteria{
      {1, {"assignment optimality", criterion1}},
      {2, {"gradient correctness", criterion2}},
      {3, {"closed-form loss values", criterion3}},
      {4, {"GCE limit behavior", criterion4}},
      {5, {"toy learnability", criterion5}},
      {6, {"noise robustness direction", criterion6}},
      {7, {"post-processing sensitivity", criterion7}},
      {8, {"evaluation protocol exactness", criterion8}},
      {9, {"determinism", criterion9}},
      {10, {"ablation structure", criterion10}},
  };
  if (selected.empty())
    for (const auto& [id, _] : criteria) selected.push_back(id);

  int failures = 0;
  for (int id : selected) {
    const auto it = criteria.find(id);
    if (it == criteria.end()) {
      std::cerr << "unknown criterion " << id << "\n";
      return 2;
    }
    Outcome o;
    try {
      o = it->second.second(s);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << "CRITERION " << id << " (" << it->second.first << "): "
              << (o.pass ? "PASS" : "FAIL") << " | " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
