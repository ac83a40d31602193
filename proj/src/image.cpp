#include "catalog/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "catalog/error.hpp"

namespace catalog {

Image::Image(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(std::size_t(w) * std::size_t(h) * channels, fill) {}

PixelRect outward_pixel_rect(const BoundingBox& box, int width, int height) {
  const auto c = box.corners();
  PixelRect r;
  r.x0 = std::clamp(int(std::floor(c.x0)), 0, width);
  r.y0 = std::clamp(int(std::floor(c.y0)), 0, height);
  r.x1 = std::clamp(int(std::ceil(c.x1)), 0, width);
  r.y1 = std::clamp(int(std::ceil(c.y1)), 0, height);
  return r;
}

Image crop(const Image& image, const PixelRect& rect) {
  if (rect.x0 < 0 || rect.y0 < 0 || rect.x1 > image.width || rect.y1 > image.height || rect.width() <= 0 ||
      rect.height() <= 0) {
    throw ValidationError("crop rectangle outside raster");
  }
  Image out(rect.width(), rect.height());
  const std::size_t row_bytes = std::size_t(rect.width()) * Image::channels;
  for (int y = 0; y < out.height; ++y) {
    std::memcpy(out.row(y), image.row(rect.y0 + y) + std::size_t(rect.x0) * Image::channels, row_bytes);
  }
  return out;
}

namespace {

png_image make_descriptor(const Image& image) {
  png_image desc;
  std::memset(&desc, 0, sizeof(desc));
  desc.version = PNG_IMAGE_VERSION;
  desc.width = png_uint_32(image.width);
  desc.height = png_uint_32(image.height);
  desc.format = PNG_FORMAT_RGB;
  return desc;
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  png_image desc;
  std::memset(&desc, 0, sizeof(desc));
  desc.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&desc, path.c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + desc.message);
  }
  desc.format = PNG_FORMAT_RGB;
  Image image;
  image.width = int(desc.width);
  image.height = int(desc.height);
  image.pixels.resize(PNG_IMAGE_SIZE(desc));
  if (!png_image_finish_read(&desc, nullptr, image.pixels.data(), 0, nullptr)) {
    const std::string msg = desc.message;
    png_image_free(&desc);
    throw IoError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return image;
}

void write_png(const Image& image, const std::filesystem::path& path) {
  png_image desc = make_descriptor(image);
  if (!png_image_write_to_file(&desc, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + desc.message);
  }
}

std::string encode_png(const Image& image) {
  png_image desc = make_descriptor(image);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&desc, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("cannot size PNG buffer: ") + desc.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&desc, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("cannot encode PNG: ") + desc.message);
  }
  out.resize(size);
  return out;
}

}  // namespace catalog
