// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "pointcell/autodiff.hpp"

/// Differentiable primitives. Every op records one node on the tape of its
/// inputs; shapes are validated eagerly and mismatches raise DimensionError.
namespace pointcell::ops {

inline constexpr double kLogFloor = 1e-12;

/// NCHW input, OIKK weight (square kernel), O bias.
Var conv2d(Var input, Var weight, Var bias, int stride, int padding);
/// Align-corners=false bilinear sampling over the two trailing axes of NCHW.
Var bilinear_resize(Var input, std::size_t out_h, std::size_t out_w);
Var softmax(Var input, std::size_t axis);
Var relu(Var input);
Var sigmoid(Var input);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var input, double factor);
Var add_scalar(Var input, double offset);
/// Concatenation along axis 1 of NCHW tensors.
Var concat_channels(const std::vector<Var>& inputs);

/// log(max(x, floor)); the gradient is zero where the floor is active.
Var log(Var input, double floor = kLogFloor);
/// max(x, floor)^exponent for a fixed exponent.
Var pow(Var input, double exponent, double floor = kLogFloor);

Var sum(Var input);
Var mean(Var input);
/// Euclidean norm of each row of a rank-2 tensor; result has one entry per row.
/// The subgradient at a zero row is taken as zero.
Var row_l2_norm(Var input);
/// Euclidean norm of all entries, returned as a one-element tensor.
Var l2_norm(Var input);

Var reshape(Var input, Shape shape);
/// Rows of a rank-2 tensor, in the order given.
Var gather_rows(Var input, const std::vector<std::size_t>& rows);
/// Individual (row, column) entries of a rank-2 tensor as a rank-1 tensor.
Var pick(Var input, const std::vector<std::pair<std::size_t, std::size_t>>& entries);
/// Reinterprets N x (K*D) x Gh x Gw head maps as (N*Gh*Gw*K) x D rows,
/// ordered cell-major (row-major over the grid) then by anchor index.
Var anchor_rows(Var input, std::size_t anchors_per_cell);

}  // namespace pointcell::ops
