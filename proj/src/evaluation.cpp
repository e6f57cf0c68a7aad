// SPDX-License-Identifier: Apache-2.0
#include "pointcell/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pointcell/errors.hpp"
#include "pointcell/matching.hpp"

namespace pointcell {

std::vector<Prediction> extract_predictions(const ProposalSet& proposals, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw ContractError("detection threshold must lie in [0, 1]");
  std::vector<Prediction> out;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    if (!(proposals.p_obj[i] > threshold)) continue;
    const auto probs = proposals.classes(i);
    const auto best = std::max_element(probs.begin(), probs.end()) - probs.begin();
    out.push_back({proposals.coords[i].x, proposals.coords[i].y, proposals.p_obj[i],
                   static_cast<int>(best)});
  }
  return out;
}

namespace {

void require_radius(double radius) {
  if (!(radius > 0.0)) throw ContractError("matching radius must be > 0");
}

double distance(const Prediction& p, const Point2& g) { return std::hypot(p.x - g.x, p.y - g.y); }

RadiusMatch fill_unmatched(RadiusMatch m, std::size_t num_preds, std::size_t num_gt) {
  std::vector<char> pm(num_preds, 0), gm(num_gt, 0);
  for (const auto& pair : m.pairs) {
    pm[pair.prediction] = 1;
    gm[pair.gt] = 1;
  }
  for (std::size_t i = 0; i < num_preds; ++i)
    if (!pm[i]) m.unmatched_predictions.push_back(i);
  for (std::size_t j = 0; j < num_gt; ++j)
    if (!gm[j]) m.unmatched_gt.push_back(j);
  return m;
}

}  // namespace

RadiusMatch greedy_match(const std::vector<Prediction>& preds, const GroundTruthSet& gt,
                         double radius) {
  require_radius(radius);
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
  std::vector<char> taken(gt.size(), 0);
  RadiusMatch m;
  for (auto i : order) {
    std::size_t best = gt.size();
    double best_d = radius;
    for (std::size_t j = 0; j < gt.size(); ++j) {
      if (taken[j]) continue;
      const double d = distance(preds[i], gt.coords[j]);
      if (d < best_d || (d == best_d && best == gt.size())) {
        best = j;
        best_d = d;
      }
    }
    if (best == gt.size()) continue;
    taken[best] = 1;
    m.pairs.push_back({i, best, best_d, 0});
  }
  return fill_unmatched(std::move(m), preds.size(), gt.size());
}

RadiusMatch hungarian_radius_match(const std::vector<Prediction>& preds, const GroundTruthSet& gt,
                                   double radius) {
  require_radius(radius);
  RadiusMatch m;
  if (!preds.empty() && gt.size() > 0) {
    // Out-of-radius pairs get a cost larger than any feasible total so the
    // solver only uses them when nothing else is left; they are dropped after.
    const bool preds_rows = preds.size() >= gt.size();
    CostMatrix costs;
    costs.rows = preds_rows ? preds.size() : gt.size();
    costs.cols = preds_rows ? gt.size() : preds.size();
    costs.values.resize(costs.rows * costs.cols);
    const double blocked = radius * static_cast<double>(costs.cols + 1) + 1.0;
    for (std::size_t i = 0; i < preds.size(); ++i)
      for (std::size_t j = 0; j < gt.size(); ++j) {
        const double d = distance(preds[i], gt.coords[j]);
        const double c = d <= radius ? d : blocked;
        if (preds_rows)
          costs.at(i, j) = c;
        else
          costs.at(j, i) = c;
      }
    const auto result = solve_assignment(costs);
    for (std::size_t col = 0; col < result.delta.size(); ++col) {
      const std::size_t pi = preds_rows ? result.delta[col] : col;
      const std::size_t gj = preds_rows ? col : result.delta[col];
      const double d = distance(preds[pi], gt.coords[gj]);
      if (d <= radius) m.pairs.push_back({pi, gj, d, 0});
    }
    std::sort(m.pairs.begin(), m.pairs.end(),
              [](const MatchedPair& a, const MatchedPair& b) { return a.prediction < b.prediction; });
  }
  return fill_unmatched(std::move(m), preds.size(), gt.size());
}

Counts Counts::from(std::size_t tp, std::size_t fp, std::size_t fn) {
  Counts c{tp, fp, fn, 0.0, 0.0, 0.0};
  const auto d = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  c.precision = d(tp, tp + fp);
  c.recall = d(tp, tp + fn);
  c.f1 = (c.precision + c.recall) > 0.0
             ? 2.0 * c.precision * c.recall / (c.precision + c.recall)
             : 0.0;
  return c;
}

namespace {

MacroScores macro(const std::vector<Counts>& per_class) {
  MacroScores s;
  std::size_t present = 0;
  for (const auto& c : per_class) {
    if (c.tp + c.fn == 0) continue;
    ++present;
    s.precision += c.precision;
    s.recall += c.recall;
    s.f1 += c.f1;
  }
  if (present) {
    s.precision /= static_cast<double>(present);
    s.recall /= static_cast<double>(present);
    s.f1 /= static_cast<double>(present);
  }
  return s;
}

}  // namespace

MetricsReport compute_metrics(const RadiusMatch& match, const std::vector<Prediction>& preds,
                              const GroundTruthSet& gt, std::size_t num_classes) {
  MetricsReport single;
  single.detection = Counts::from(match.pairs.size(), match.unmatched_predictions.size(),
                                  match.unmatched_gt.size());
  std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  auto cls = [&](int c) {
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes)
      throw ValidationError("class id " + std::to_string(c) + " outside [0, " +
                            std::to_string(num_classes) + ")");
    return static_cast<std::size_t>(c);
  };
  for (const auto& pair : match.pairs) {
    const auto pc = cls(preds[pair.prediction].class_id);
    const auto gc = cls(gt.classes[pair.gt]);
    if (pc == gc) {
      ++tp[pc];
    } else {
      ++fp[pc];
      ++fn[gc];
    }
  }
  for (auto i : match.unmatched_predictions) ++fp[cls(preds[i].class_id)];
  for (auto j : match.unmatched_gt) ++fn[cls(gt.classes[j])];
  for (std::size_t c = 0; c < num_classes; ++c)
    single.per_class.push_back(Counts::from(tp[c], fp[c], fn[c]));
  single.classification_macro = macro(single.per_class);
  single.matched_pairs = match.pairs;
  return single;
}

MetricsAccumulator::MetricsAccumulator(std::size_t num_classes)
    : class_tp_(num_classes, 0), class_fp_(num_classes, 0), class_fn_(num_classes, 0) {}

void MetricsAccumulator::add(const MetricsReport& report, std::size_t image_index) {
  if (report.per_class.size() != class_tp_.size())
    throw ContractError("metrics report has a different class count");
  tp_ += report.detection.tp;
  fp_ += report.detection.fp;
  fn_ += report.detection.fn;
  for (std::size_t c = 0; c < class_tp_.size(); ++c) {
    class_tp_[c] += report.per_class[c].tp;
    class_fp_[c] += report.per_class[c].fp;
    class_fn_[c] += report.per_class[c].fn;
  }
  for (auto pair : report.matched_pairs) {
    pair.image = image_index;
    pairs_.push_back(pair);
  }
}

MetricsReport MetricsAccumulator::finish() const {
  MetricsReport r;
  r.detection = Counts::from(tp_, fp_, fn_);
  for (std::size_t c = 0; c < class_tp_.size(); ++c)
    r.per_class.push_back(Counts::from(class_tp_[c], class_fp_[c], class_fn_[c]));
  r.classification_macro = macro(r.per_class);
  r.matched_pairs = pairs_;
  return r;
}

nlohmann::json metrics_to_json(const MetricsReport& report) {
  auto counts = [](const Counts& c) {
    return nlohmann::json{{"tp", c.tp},        {"fp", c.fp},          {"fn", c.fn},
                          {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}};
  };
  nlohmann::json j;
  j["detection"] = counts(report.detection);
  j["per_class"] = nlohmann::json::array();
  for (const auto& c : report.per_class) j["per_class"].push_back(counts(c));
  j["classification_macro"] = {{"precision", report.classification_macro.precision},
                               {"recall", report.classification_macro.recall},
                               {"f1", report.classification_macro.f1}};
  j["matched_pairs"] = nlohmann::json::array();
  for (const auto& p : report.matched_pairs)
    j["matched_pairs"].push_back({{"image", p.image},
                                  {"prediction", p.prediction},
                                  {"gt", p.gt},
                                  {"distance_px", p.distance}});
  return j;
}

}  // namespace pointcell
