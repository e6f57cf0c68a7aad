// SPDX-License-Identifier: Apache-2.0
#include "pointcell/backbone.hpp"

#include <algorithm>
#include <cmath>

#include "pointcell/errors.hpp"
#include "pointcell/ops.hpp"

namespace pointcell {

std::size_t BackboneConfig::encoder_stride() const {
  if (stage_channels.empty()) return 0;
  return std::size_t{4} << (stage_channels.size() - 1);
}

void BackboneConfig::validate() const {
  if (stage_channels.empty()) throw ValidationError("backbone.stage_channels must not be empty");
  for (auto c : stage_channels)
    if (c == 0) throw ValidationError("backbone.stage_channels entries must be positive");
  if (pfa_channels == 0) throw ValidationError("backbone.pfa_channels must be positive");
  if (num_classes < 2) throw ValidationError("backbone.num_classes must be >= 2");
  if (anchors_per_cell == 0) throw ValidationError("backbone.anchors_per_cell must be positive");
  if (anchor_offsets.size() != anchors_per_cell)
    throw ValidationError("backbone.anchor_offsets has " + std::to_string(anchor_offsets.size()) +
                          " entries, anchors_per_cell is " + std::to_string(anchors_per_cell));
  if (head_stride == 0 || (head_stride & (head_stride - 1)) != 0)
    throw ValidationError("backbone.head_stride must be a power of two");
  if (head_stride != encoder_stride())
    throw ValidationError("backbone.head_stride " + std::to_string(head_stride) +
                          " differs from the encoder's final stride " +
                          std::to_string(encoder_stride()));
}

AnchorGrid build_anchor_grid(std::size_t height, std::size_t width, const BackboneConfig& config) {
  config.validate();
  const std::size_t s = config.head_stride;
  if (height < s || width < s)
    throw DimensionError("image " + std::to_string(height) + "x" + std::to_string(width) +
                         " is smaller than one " + std::to_string(s) + "-pixel anchor cell");
  AnchorGrid grid;
  grid.grid_h = (height + s - 1) / s;
  grid.grid_w = (width + s - 1) / s;
  grid.anchors_per_cell = config.anchors_per_cell;
  const double max_x = static_cast<double>(width - 1);
  const double max_y = static_cast<double>(height - 1);
  const double half = static_cast<double>(s) / 2.0;
  for (std::size_t gy = 0; gy < grid.grid_h; ++gy)
    for (std::size_t gx = 0; gx < grid.grid_w; ++gx) {
      const double cx = std::clamp(static_cast<double>(gx * s) + half, 0.0, max_x);
      const double cy = std::clamp(static_cast<double>(gy * s) + half, 0.0, max_y);
      for (const auto& off : config.anchor_offsets)
        grid.points.push_back(
            {std::clamp(cx + off.x, 0.0, max_x), std::clamp(cy + off.y, 0.0, max_y)});
    }
  return grid;
}

ProposalVars decode_proposals(Tape& tape, const AnchorGrid& grid, const HeadOutputs& heads) {
  const std::size_t m = grid.size();
  if (heads.offsets.shape() != Shape{m, 2} || heads.objectness_logits.shape() != Shape{m, 2} ||
      heads.class_logits.value().rank() != 2 || heads.class_logits.shape()[0] != m)
    throw DimensionError("decode_proposals: head rows do not match " + std::to_string(m) +
                         " anchors");
  Tensor anchors = Tensor::zeros({m, 2});
  for (std::size_t i = 0; i < m; ++i) {
    anchors.data[2 * i] = grid.points[i].x;
    anchors.data[2 * i + 1] = grid.points[i].y;
  }
  ProposalVars p;
  p.coords = ops::add(tape.constant(std::move(anchors)), heads.offsets);
  p.objectness = ops::softmax(heads.objectness_logits, 1);
  p.class_probs = ops::softmax(heads.class_logits, 1);
  return p;
}

ProposalSet to_proposal_set(const ProposalVars& proposals) {
  ProposalSet set;
  const auto& c = proposals.coords.value().data;
  const auto& o = proposals.objectness.value().data;
  const std::size_t m = proposals.coords.shape()[0];
  set.coords.resize(m);
  set.p_bkg.resize(m);
  set.p_obj.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    set.coords[i] = {c[2 * i], c[2 * i + 1]};
    set.p_bkg[i] = o[2 * i];
    set.p_obj[i] = o[2 * i + 1];
  }
  set.num_classes = proposals.class_probs.shape()[1];
  set.class_probs = proposals.class_probs.value().data;
  return set;
}

Tensor image_tensor(const std::vector<float>& pixels, std::size_t height, std::size_t width) {
  if (pixels.size() != height * width * 3)
    throw DimensionError("image_tensor: expected " + std::to_string(height * width * 3) +
                         " values, got " + std::to_string(pixels.size()));
  Tensor t = Tensor::zeros({1, 3, height, width});
  const std::size_t plane = height * width;
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < 3; ++c)
      t.data[c * plane + i] = (static_cast<double>(pixels[i * 3 + c]) - 0.5) / 0.25;
  return t;
}

ConvLayer ConvLayer::create(ParameterStore& store, const std::string& name, std::size_t in,
                            std::size_t out, std::size_t kernel, int stride, std::uint64_t seed,
                            double gain) {
  ConvLayer layer;
  const double fan_in = static_cast<double>(in * kernel * kernel);
  layer.weight =
      &store.add_normal(name + ".weight", {out, in, kernel, kernel}, std::sqrt(gain / fan_in), seed);
  layer.bias = &store.add_constant(name + ".bias", {out}, 0.0);
  layer.stride = stride;
  layer.padding = static_cast<int>(kernel / 2);
  return layer;
}

Var ConvLayer::operator()(Tape& tape, Var x) const {
  return ops::conv2d(x, tape.leaf(*weight), tape.leaf(*bias), stride, padding);
}

Encoder::Encoder(ParameterStore& store, const BackboneConfig& config, std::uint64_t seed)
    : stride_(config.encoder_stride()) {
  config.validate();
  const auto& ch = config.stage_channels;
  stem_.push_back(ConvLayer::create(store, "encoder.stem0", 3, ch[0], 3, 2, seed));
  stem_.push_back(ConvLayer::create(store, "encoder.stem1", ch[0], ch[0], 3, 2, seed));
  for (std::size_t s = 0; s < ch.size(); ++s) {
    const std::size_t in = s == 0 ? ch[0] : ch[s - 1];
    const std::string base = "encoder.stage" + std::to_string(s);
    stages_.push_back({ConvLayer::create(store, base + ".conv0", in, ch[s], 3, s == 0 ? 1 : 2, seed),
                       ConvLayer::create(store, base + ".conv1", ch[s], ch[s], 3, 1, seed)});
  }
}

std::vector<Var> Encoder::operator()(Tape& tape, Var image) const {
  const auto& s = image.shape();
  if (s.size() != 4 || s[1] != 3)
    throw DimensionError("encode: expected a 1x3xHxW image, got " + shape_str(s));
  if (s[2] % stride_ != 0 || s[3] % stride_ != 0)
    throw DimensionError("encode: image " + std::to_string(s[2]) + "x" + std::to_string(s[3]) +
                         " is not divisible by stride " + std::to_string(stride_));
  Var x = image;
  for (const auto& conv : stem_) x = ops::relu(conv(tape, x));
  std::vector<Var> features;
  for (const auto& stage : stages_) {
    for (const auto& conv : stage) x = ops::relu(conv(tape, x));
    features.push_back(x);
  }
  return features;
}

PyramidAggregator::PyramidAggregator(ParameterStore& store, const BackboneConfig& config,
                                     std::size_t target_level, std::uint64_t seed,
                                     const std::string& prefix)
    : target_level_(target_level), enabled_(config.pfa_enabled) {
  const auto& ch = config.stage_channels;
  if (target_level >= ch.size()) throw ContractError("PFA target level out of range");
  projections_.resize(ch.size());
  for (std::size_t s = 0; s < ch.size(); ++s) {
    if (!enabled_ && s + 1 != ch.size()) continue;
    projections_[s] = ConvLayer::create(store, prefix + ".proj" + std::to_string(s), ch[s],
                                        config.pfa_channels, 1, 1, seed, 1.0);
  }
}

Var PyramidAggregator::operator()(Tape& tape, const std::vector<Var>& stages) const {
  if (stages.size() != projections_.size())
    throw DimensionError("aggregate_pfa: expected " + std::to_string(projections_.size()) +
                         " stages, got " + std::to_string(stages.size()));
  for (std::size_t s = 0; s < stages.size(); ++s) {
    if (stages[s].shape()[0] != stages[0].shape()[0])
      throw DimensionError("aggregate_pfa: batch extents differ between stages");
    if (s > 0 && stages[s].shape()[2] >= stages[s - 1].shape()[2])
      throw DimensionError("aggregate_pfa: stage strides must increase strictly");
  }
  const std::size_t th = stages[target_level_].shape()[2];
  const std::size_t tw = stages[target_level_].shape()[3];
  std::optional<Var> total;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    if (!projections_[s].weight) continue;
    Var p = projections_[s](tape, stages[s]);
    if (p.shape()[2] != th || p.shape()[3] != tw) p = ops::bilinear_resize(p, th, tw);
    total = total ? ops::add(*total, p) : p;
  }
  return *total;
}

ResidualBlock ResidualBlock::create(ParameterStore& store, const std::string& name,
                                    std::size_t channels, std::uint64_t seed) {
  return {ConvLayer::create(store, name + ".conv0", channels, channels, 3, 1, seed),
          ConvLayer::create(store, name + ".conv1", channels, channels, 3, 1, seed, 0.5)};
}

Var ResidualBlock::operator()(Tape& tape, Var x) const {
  Var h = ops::relu(first(tape, x));
  return ops::relu(ops::add(second(tape, h), x));
}

TaskHeads::TaskHeads(ParameterStore& store, const BackboneConfig& config, std::uint64_t seed)
    : anchors_(config.anchors_per_cell), independent_(config.independent_classifier_enabled) {
  const std::size_t c = config.pfa_channels, k = config.anchors_per_cell;
  for (int b = 0; b < 2; ++b) {
    const std::string idx = std::to_string(b);
    reg_tower_.push_back(ResidualBlock::create(store, "heads.reg.block" + idx, c, seed));
    det_tower_.push_back(ResidualBlock::create(store, "heads.det.block" + idx, c, seed));
    if (independent_)
      cls_tower_.push_back(ResidualBlock::create(store, "heads.cls.block" + idx, c, seed));
  }
  // Near-zero output layers: proposals start at their anchors with flat scores.
  const double out_gain = 1e-4 * static_cast<double>(c);
  reg_out_ = ConvLayer::create(store, "heads.reg.out", c, 2 * k, 1, 1, seed, out_gain);
  det_out_ = ConvLayer::create(store, "heads.det.out", c, 2 * k, 1, 1, seed, out_gain);
  cls_out_ =
      ConvLayer::create(store, "heads.cls.out", c, config.num_classes * k, 1, 1, seed, out_gain);
}

HeadOutputs TaskHeads::operator()(Tape& tape, Var features) const {
  auto tower = [&](const std::vector<ResidualBlock>& blocks, Var x) {
    for (const auto& b : blocks) x = b(tape, x);
    return x;
  };
  Var reg = tower(reg_tower_, features);
  Var det = tower(det_tower_, features);
  Var cls = independent_ ? tower(cls_tower_, features) : det;
  HeadOutputs out;
  out.offsets = ops::anchor_rows(reg_out_(tape, reg), anchors_);
  out.objectness_logits = ops::anchor_rows(det_out_(tape, det), anchors_);
  out.class_logits = ops::anchor_rows(cls_out_(tape, cls), anchors_);
  return out;
}

PointModel::PointModel(const BackboneConfig& config, std::uint64_t seed)
    : config_(config),
      encoder_(params_, config_, seed),
      aggregator_(params_, config_, config_.stage_channels.size() - 1, seed),
      heads_(params_, config_, seed) {}

std::vector<Var> PointModel::encode(Tape& tape, Var image) const { return encoder_(tape, image); }

Var PointModel::aggregate(Tape& tape, const std::vector<Var>& stages) const {
  return aggregator_(tape, stages);
}

HeadOutputs PointModel::heads(Tape& tape, Var features) const { return heads_(tape, features); }

ProposalVars PointModel::forward(Tape& tape, Var image, const AnchorGrid& grid) const {
  Var features = aggregate(tape, encode(tape, image));
  if (features.shape()[2] != grid.grid_h || features.shape()[3] != grid.grid_w)
    throw ContractError("run_heads: feature grid " + std::to_string(features.shape()[2]) + "x" +
                        std::to_string(features.shape()[3]) + " does not match anchor grid " +
                        std::to_string(grid.grid_h) + "x" + std::to_string(grid.grid_w));
  return decode_proposals(tape, grid, heads(tape, features));
}

}  // namespace pointcell
