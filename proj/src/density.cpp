// SPDX-License-Identifier: Apache-2.0
#include "pointcell/density.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pointcell/errors.hpp"
#include "pointcell/ops.hpp"

namespace pointcell {

void PeakParams::validate() const {
  if (min_distance < 1) throw ValidationError("min_distance must be >= 1");
  if (!(abs_threshold >= 0.0 && abs_threshold <= 1.0))
    throw ValidationError("peak threshold must lie in [0, 1]");
}

DensityMap make_rdm(const GroundTruthSet& points, std::size_t height, std::size_t width,
                    int kernel_size, double sigma) {
  if (kernel_size < 1 || kernel_size % 2 == 0) throw ContractError("RDM kernel size must be odd");
  if (!(sigma > 0.0)) throw ContractError("RDM sigma must be positive");
  DensityMap map{height, width, std::vector<double>(height * width, 0.0)};
  const int r = kernel_size / 2;
  for (const auto& p : points.coords) {
    const long cx = std::lround(p.x), cy = std::lround(p.y);
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        const long x = cx + dx, y = cy + dy;
        if (x < 0 || y < 0 || x >= static_cast<long>(width) || y >= static_cast<long>(height))
          continue;
        const double v = std::exp(-static_cast<double>(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        double& cell = map.values[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)];
        cell = std::max(cell, v);
      }
  }
  return map;
}

Var bce_iou_loss(Var pred, const Tensor& target, double w_bce, double w_iou) {
  if (pred.shape() != target.shape)
    throw DimensionError("bce_iou_loss: prediction " + shape_str(pred.shape()) +
                         " and target " + shape_str(target.shape) + " differ");
  Tape& tape = pred.tape();
  Tensor inv = target;
  for (auto& v : inv.data) v = 1.0 - v;
  Var t = tape.constant(target);
  Var one_minus_t = tape.constant(std::move(inv));
  Var log_p = ops::log(pred);
  Var log_q = ops::log(ops::add_scalar(ops::scale(pred, -1.0), 1.0));
  Var bce = ops::scale(ops::mean(ops::add(ops::mul(t, log_p), ops::mul(one_minus_t, log_q))), -1.0);

  double target_sum = 0.0;
  for (double v : target.data) target_sum += v;
  Var inter = ops::sum(ops::mul(pred, t));
  Var uni = ops::add_scalar(ops::sub(ops::sum(pred), inter), target_sum);
  Var iou = ops::mul(inter, ops::pow(uni, -1.0));
  Var iou_term = ops::add_scalar(ops::scale(iou, -1.0), 1.0);
  return ops::add(ops::scale(bce, w_bce), ops::scale(iou_term, w_iou));
}

double bce_iou_loss(const DensityMap& pred, const DensityMap& target, double w_bce, double w_iou) {
  if (pred.height != target.height || pred.width != target.width)
    throw DimensionError("bce_iou_loss: map sizes differ");
  Tape tape;
  Var p = tape.constant(Tensor({pred.height, pred.width}, pred.values));
  return bce_iou_loss(p, Tensor({target.height, target.width}, target.values), w_bce, w_iou).item();
}

std::vector<Peak> find_peaks(const DensityMap& map, const PeakParams& params) {
  params.validate();
  const long h = static_cast<long>(map.height), w = static_cast<long>(map.width);
  const long d = params.min_distance;
  std::vector<std::size_t> candidates;
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      const double v = map.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
      if (!(v > 0.0) || v < params.abs_threshold) continue;
      bool is_max = true;
      for (long yy = std::max(0L, y - d); yy <= std::min(h - 1, y + d) && is_max; ++yy)
        for (long xx = std::max(0L, x - d); xx <= std::min(w - 1, x + d); ++xx)
          if (map.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) > v) {
            is_max = false;
            break;
          }
      if (is_max) candidates.push_back(static_cast<std::size_t>(y * w + x));
    }
  std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    return map.values[a] > map.values[b];
  });
  std::vector<Peak> peaks;
  std::vector<std::pair<long, long>> accepted;
  for (auto idx : candidates) {
    const long y = static_cast<long>(idx) / w, x = static_cast<long>(idx) % w;
    bool suppressed = false;
    for (const auto& [ay, ax] : accepted)
      if (std::max(std::abs(ay - y), std::abs(ax - x)) < d) {
        suppressed = true;
        break;
      }
    if (suppressed) continue;
    accepted.emplace_back(y, x);
    peaks.push_back({static_cast<double>(x), static_cast<double>(y), map.values[idx]});
  }
  return peaks;
}

DensityModel::DensityModel(const BackboneConfig& config, const DensityHeadConfig& head,
                           std::uint64_t seed)
    : config_(config),
      encoder_(params_, config_, seed),
      aggregator_(params_, config_, 0, seed),
      mid_(ConvLayer::create(params_, "density.mid", config.pfa_channels, head.head_channels, 3, 1,
                             seed)),
      out_(ConvLayer::create(params_, "density.out", head.head_channels, 1, 3, 1, seed, 0.1)) {}

Var DensityModel::forward(Tape& tape, Var image) const {
  const std::size_t h = image.shape()[2], w = image.shape()[3];
  Var features = aggregator_(tape, encoder_(tape, image));
  Var mid = ops::relu(mid_(tape, features));
  Var up = ops::bilinear_resize(mid, h, w);
  return ops::sigmoid(out_(tape, up));
}

DensityMap DensityModel::predict(const Tensor& image) const {
  Tensor input = image;
  Tape tape;
  Var out = forward(tape, tape.leaf(input));
  return {image.shape[2], image.shape[3], out.value().data};
}

}  // namespace pointcell
