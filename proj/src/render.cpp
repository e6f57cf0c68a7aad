// SPDX-License-Identifier: Apache-2.0
#include "pointcell/render.hpp"

#include <algorithm>
#include <cmath>

#include "pointcell/errors.hpp"

namespace pointcell {

namespace {

Rgb hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(h, 360.0) / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  const double m = v - c;
  auto to8 = [&](double u) { return static_cast<std::uint8_t>(std::lround((u + m) * 255.0)); };
  return {to8(r), to8(g), to8(b)};
}

void set_pixel(Rgb8Image& img, long x, long y, const Rgb& c) {
  if (x < 0 || y < 0 || x >= static_cast<long>(img.width) || y >= static_cast<long>(img.height))
    return;
  auto* p = &img.data[(static_cast<std::size_t>(y) * img.width + static_cast<std::size_t>(x)) * 3];
  p[0] = c[0], p[1] = c[1], p[2] = c[2];
}

void draw_line(Rgb8Image& img, long x0, long y0, long x1, long y1, const Rgb& c) {
  const long dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  long err = dx + dy;
  while (true) {
    set_pixel(img, x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const long e2 = 2 * err;
    if (e2 >= dy) err += dy, x0 += sx;
    if (e2 <= dx) err += dx, y0 += sy;
  }
}

}  // namespace

std::vector<Rgb> class_palette(std::size_t num_classes) {
  std::vector<Rgb> palette{{255, 0, 0}, {0, 255, 0}, {255, 255, 0}, {255, 192, 203}};
  const std::size_t extra = num_classes > palette.size() ? num_classes - palette.size() : 0;
  for (std::size_t k = 0; k < extra; ++k)
    palette.push_back(hsv_to_rgb(200.0 + 360.0 * static_cast<double>(k) / static_cast<double>(extra),
                                 0.8, 0.9));
  palette.resize(std::max<std::size_t>(num_classes, 1));
  return palette;
}

Rgb8Image render_overlay(const Rgb8Image& image, const std::vector<OverlayMarker>& markers,
                         std::size_t num_classes, double radius) {
  if (image.data.size() != image.height * image.width * 3)
    throw DimensionError("render_overlay: pixel buffer does not match image size");
  if (!(radius > 0.0)) throw ValidationError("render_overlay: radius must be > 0");
  const auto palette = class_palette(num_classes);
  Rgb8Image out = image;
  const long r = static_cast<long>(std::ceil(radius));
  for (const auto& m : markers) {
    if (m.class_id < 0 || static_cast<std::size_t>(m.class_id) >= palette.size())
      throw ValidationError("render_overlay: class " + std::to_string(m.class_id) +
                            " outside palette of " + std::to_string(palette.size()));
    const long cx = std::lround(m.x), cy = std::lround(m.y);
    for (long y = cy - r; y <= cy + r; ++y)
      for (long x = cx - r; x <= cx + r; ++x) {
        const double dx = static_cast<double>(x) - m.x, dy = static_cast<double>(y) - m.y;
        if (dx * dx + dy * dy <= radius * radius) set_pixel(out, x, y, palette[m.class_id]);
      }
  }
  return out;
}

Rgb8Image render_line_plot(const std::vector<PlotSeries>& series, double y_min, double y_max,
                           std::size_t width, std::size_t height) {
  if (width < 40 || height < 40) throw ValidationError("render_line_plot: canvas too small");
  if (!(y_max > y_min)) throw ValidationError("render_line_plot: y_max must exceed y_min");
  Rgb8Image img{height, width, std::vector<std::uint8_t>(height * width * 3, 255)};
  const long left = 30, right = static_cast<long>(width) - 10;
  const long top = 10, bottom = static_cast<long>(height) - 30;
  const Rgb axis{0, 0, 0}, grid{220, 220, 220};
  for (int k = 1; k < 10; ++k) {
    const long y = bottom - (bottom - top) * k / 10;
    draw_line(img, left, y, right, y, grid);
  }
  draw_line(img, left, top, left, bottom, axis);
  draw_line(img, left, bottom, right, bottom, axis);
  draw_line(img, left, top, right, top, axis);
  draw_line(img, right, top, right, bottom, axis);

  double x_min = 0.0, x_max = 0.0;
  bool first = true;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw DimensionError("render_line_plot: x/y length mismatch");
    for (double x : s.x) {
      x_min = first ? x : std::min(x_min, x);
      x_max = first ? x : std::max(x_max, x);
      first = false;
    }
  }
  if (x_max == x_min) x_min -= 0.5, x_max += 0.5;
  auto px = [&](double x) {
    return left + std::lround((x - x_min) / (x_max - x_min) * static_cast<double>(right - left));
  };
  auto py = [&](double y) {
    const double t = std::clamp((y - y_min) / (y_max - y_min), 0.0, 1.0);
    return bottom - std::lround(t * static_cast<double>(bottom - top));
  };
  const auto colors = class_palette(std::max<std::size_t>(series.size(), 1));
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ser = series[s];
    const Rgb c = s == 0 ? Rgb{31, 119, 180} : colors[s];
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      const long x = px(ser.x[i]), y = py(ser.y[i]);
      if (i > 0) draw_line(img, px(ser.x[i - 1]), py(ser.y[i - 1]), x, y, c);
      for (long dy = -2; dy <= 2; ++dy)
        for (long dx = -2; dx <= 2; ++dx) set_pixel(img, x + dx, y + dy, c);
    }
  }
  return img;
}

}  // namespace pointcell
