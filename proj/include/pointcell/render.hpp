// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pointcell/image_io.hpp"

namespace pointcell {

using Rgb = std::array<std::uint8_t, 3>;

/// Red, green, yellow, pink, then evenly spread hues for further classes.
std::vector<Rgb> class_palette(std::size_t num_classes);

struct OverlayMarker {
  double x = 0.0;
  double y = 0.0;
  int class_id = 0;
};

/// Draws a filled dot of `radius` pixels per marker; pixels whose centers lie
/// within the radius take the class color. No markers leaves the image as is.
Rgb8Image render_overlay(const Rgb8Image& image, const std::vector<OverlayMarker>& markers,
                         std::size_t num_classes, double radius = 2.0);

struct PlotSeries {
  std::vector<double> x;
  std::vector<double> y;
};

/// Plain line plot on a white canvas: axes frame, one polyline with square
/// markers per series, y fixed to [y_min, y_max]. No text is drawn.
Rgb8Image render_line_plot(const std::vector<PlotSeries>& series, double y_min = 0.0,
                           double y_max = 1.0, std::size_t width = 480, std::size_t height = 320);

}  // namespace pointcell
