#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "catalog/geometry.hpp"

namespace catalog {

// 8-bit RGB raster, row-major, no padding.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  static constexpr int channels = 3;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 255);

  std::uint8_t* row(int y) { return pixels.data() + std::size_t(y) * std::size_t(width) * channels; }
  const std::uint8_t* row(int y) const {
    return pixels.data() + std::size_t(y) * std::size_t(width) * channels;
  }
};

// Half-open integer pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

// Corner form rounded outward (floor on the low side, ceil on the high side)
// and clipped to a width x height raster.
PixelRect outward_pixel_rect(const BoundingBox& box, int width, int height);

Image crop(const Image& image, const PixelRect& rect);

Image read_png(const std::filesystem::path& path);
void write_png(const Image& image, const std::filesystem::path& path);
std::string encode_png(const Image& image);

}  // namespace catalog
