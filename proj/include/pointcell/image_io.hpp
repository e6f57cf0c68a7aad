// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace pointcell {

/// 8-bit RGB raster, row-major interleaved.
struct Rgb8Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> data;
};

void write_png_rgb8(const std::filesystem::path& path, const Rgb8Image& image);
/// Accepts gray/RGB/RGBA/palette PNGs and converts to 8-bit RGB.
Rgb8Image read_png_rgb8(const std::filesystem::path& path);
void write_png_gray16(const std::filesystem::path& path, std::size_t height, std::size_t width,
                      const std::vector<std::uint16_t>& values);

/// [0,1] floats <-> 8-bit with round-to-nearest.
Rgb8Image to_rgb8(const std::vector<float>& pixels, std::size_t height, std::size_t width);
std::vector<float> from_rgb8(const Rgb8Image& image);

}  // namespace pointcell
