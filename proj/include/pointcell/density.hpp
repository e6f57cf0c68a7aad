// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "pointcell/autodiff.hpp"
#include "pointcell/backbone.hpp"
#include "pointcell/parameters.hpp"
#include "pointcell/types.hpp"

namespace pointcell {

struct DensityMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;  // row-major, each in [0, 1]

  double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
};

struct PeakParams {
  int min_distance = 3;
  double abs_threshold = 0.5;

  void validate() const;
};

struct Peak {
  double x = 0.0;
  double y = 0.0;
  double score = 0.0;
};

/// Stamps a kernel_size x kernel_size Gaussian with peak value 1 at each
/// point's rounded pixel; overlapping stamps combine by maximum.
DensityMap make_rdm(const GroundTruthSet& points, std::size_t height, std::size_t width,
                    int kernel_size = 7, double sigma = 6.0);

/// w_bce * mean pixelwise BCE + w_iou * (1 - soft IoU),
/// soft IoU = sum(p t) / sum(p + t - p t). Log arguments floored at 1e-12.
double bce_iou_loss(const DensityMap& pred, const DensityMap& target, double w_bce = 0.8,
                    double w_iou = 0.2);
Var bce_iou_loss(Var pred, const Tensor& target, double w_bce = 0.8, double w_iou = 0.2);

/// Local-maximum search. A pixel is a candidate when it is >= every pixel of
/// its (2d+1)^2 window, >= abs_threshold and > 0. Candidates are visited by
/// descending value (row-major order on ties); any candidate closer than d
/// (Chebyshev) to an accepted peak is suppressed.
std::vector<Peak> find_peaks(const DensityMap& map, const PeakParams& params);

struct DensityHeadConfig {
  std::size_t head_channels = 32;
};

/// Regression baseline: shared encoder, PFA aggregated at the stride-4 grid,
/// a 3x3 conv+relu, bilinear upsampling to input resolution and a 3x3 conv
/// to one sigmoid channel.
class DensityModel {
 public:
  DensityModel(const BackboneConfig& config, const DensityHeadConfig& head, std::uint64_t seed);
  DensityModel(const DensityModel&) = delete;
  DensityModel& operator=(const DensityModel&) = delete;

  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }

  /// 1 x 1 x H x W probabilities.
  Var forward(Tape& tape, Var image) const;
  DensityMap predict(const Tensor& image) const;

 private:
  BackboneConfig config_;
  ParameterStore params_;
  Encoder encoder_;
  PyramidAggregator aggregator_;
  ConvLayer mid_;
  ConvLayer out_;
};

}  // namespace pointcell
