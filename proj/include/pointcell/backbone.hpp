// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pointcell/autodiff.hpp"
#include "pointcell/parameters.hpp"
#include "pointcell/types.hpp"

namespace pointcell {

struct BackboneConfig {
  std::vector<std::size_t> stage_channels{32, 64, 128, 256};
  std::size_t pfa_channels = 128;
  std::size_t num_classes = 2;
  std::size_t anchors_per_cell = 5;
  std::vector<Point2> anchor_offsets{{0, 0}, {-8, -8}, {-8, 8}, {8, 8}, {8, -8}};
  std::size_t head_stride = 32;
  bool pfa_enabled = true;
  bool independent_classifier_enabled = true;

  /// Stride of the deepest encoder stage: the stem downsamples by 4 and every
  /// later stage by 2.
  std::size_t encoder_stride() const;
  /// Throws ValidationError naming the offending field.
  void validate() const;
};

/// Anchor coordinates in pixels, ordered cell-major (row-major over the
/// cell grid) then by offset index.
struct AnchorGrid {
  std::vector<Point2> points;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::size_t anchors_per_cell = 0;

  std::size_t size() const { return points.size(); }
};

/// One cell per head_stride block, partial edge blocks included. Every
/// anchor is clamped into [0, W-1] x [0, H-1].
AnchorGrid build_anchor_grid(std::size_t height, std::size_t width, const BackboneConfig& config);

/// Per-anchor head rows: offsets M x 2, objectness logits M x 2
/// (background, object), class logits M x C.
struct HeadOutputs {
  Var offsets;
  Var objectness_logits;
  Var class_logits;
};

/// Graph-side proposals, used by the losses.
struct ProposalVars {
  Var coords;       // M x 2, refined pixel coordinates
  Var objectness;   // M x 2 probabilities (background, object)
  Var class_probs;  // M x C probabilities
};

/// Refined coordinates are anchor + offset and are not clamped; logits go
/// through a softmax over each row.
ProposalVars decode_proposals(Tape& tape, const AnchorGrid& grid, const HeadOutputs& heads);
/// Detached values of decoded proposals.
ProposalSet to_proposal_set(const ProposalVars& proposals);

/// Maps [0,1] HxWx3 pixels to a normalized 1x3xHxW tensor.
Tensor image_tensor(const std::vector<float>& pixels, std::size_t height, std::size_t width);

/// 3x3 convolution with its own weight/bias parameters.
struct ConvLayer {
  Tensor* weight = nullptr;
  Tensor* bias = nullptr;
  int stride = 1;
  int padding = 0;

  static ConvLayer create(ParameterStore& store, const std::string& name, std::size_t in,
                          std::size_t out, std::size_t kernel, int stride, std::uint64_t seed,
                          double gain = 2.0);
  Var operator()(Tape& tape, Var x) const;
};

/// Stem (two stride-2 convolutions) followed by stages of two 3x3
/// conv+relu layers; stages after the first open with a stride-2 conv.
class Encoder {
 public:
  Encoder(ParameterStore& store, const BackboneConfig& config, std::uint64_t seed);
  /// One feature map per stage, at strides 4, 8, 16, ...
  std::vector<Var> operator()(Tape& tape, Var image) const;

 private:
  std::vector<ConvLayer> stem_;
  std::vector<std::vector<ConvLayer>> stages_;
  std::size_t stride_;
};

/// Pyramidal feature aggregation: each stage is projected to pfa_channels by
/// a 1x1 conv, bilinearly resized to the grid of stage `target_level`, and the
/// results are summed. With PFA disabled only the deepest stage is projected
/// (and resized when the target is not the deepest stage).
class PyramidAggregator {
 public:
  PyramidAggregator(ParameterStore& store, const BackboneConfig& config, std::size_t target_level,
                    std::uint64_t seed, const std::string& prefix = "pfa");
  Var operator()(Tape& tape, const std::vector<Var>& stages) const;

 private:
  std::vector<ConvLayer> projections_;  // indexed by stage; unused stages hold nulls
  std::size_t target_level_;
  bool enabled_;
};

/// conv3x3 -> relu -> conv3x3, added to the input, then relu.
struct ResidualBlock {
  ConvLayer first;
  ConvLayer second;
  static ResidualBlock create(ParameterStore& store, const std::string& name, std::size_t channels,
                              std::uint64_t seed);
  Var operator()(Tape& tape, Var x) const;
};

/// Regression, detection and classification towers (two residual blocks and
/// a 1x1 conv each). Without the independent classifier the classification
/// 1x1 conv reads the detection tower's features.
class TaskHeads {
 public:
  TaskHeads(ParameterStore& store, const BackboneConfig& config, std::uint64_t seed);
  HeadOutputs operator()(Tape& tape, Var features) const;

 private:
  std::vector<ResidualBlock> reg_tower_, det_tower_, cls_tower_;
  ConvLayer reg_out_, det_out_, cls_out_;
  std::size_t anchors_;
  bool independent_;
};

/// The anchor-point recognition network: encoder, PFA at the head stride,
/// task heads and proposal decoding.
class PointModel {
 public:
  PointModel(const BackboneConfig& config, std::uint64_t seed);
  PointModel(const PointModel&) = delete;
  PointModel& operator=(const PointModel&) = delete;

  const BackboneConfig& config() const { return config_; }
  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }

  std::vector<Var> encode(Tape& tape, Var image) const;
  Var aggregate(Tape& tape, const std::vector<Var>& stages) const;
  HeadOutputs heads(Tape& tape, Var features) const;
  /// Full forward pass for a 1x3xHxW image tensor.
  ProposalVars forward(Tape& tape, Var image, const AnchorGrid& grid) const;

 private:
  BackboneConfig config_;
  ParameterStore params_;
  Encoder encoder_;
  PyramidAggregator aggregator_;
  TaskHeads heads_;
};

}  // namespace pointcell
