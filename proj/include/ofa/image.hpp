#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ofa {

/// 8-bit RGB image, row-major, tightly packed.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* at(int x, int y) {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }

  void fill(std::uint8_t r, std::uint8_t g, std::uint8_t b);

  bool operator==(const Image& other) const = default;
};

/// 1-bit mask, stored unpacked.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // 0 or 1 per pixel

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  std::size_t count() const;
};

void write_png(const std::string& path, const Image& image);
Image read_png(const std::string& path);

/// Persists as 1-bit grayscale PNG.
void write_mask_png(const std::string& path, const Mask& mask);

/// Bilinear resample of the axis-aligned source region [x0,x1]x[y0,y1]
/// (inclusive pixel coordinates) onto a target of size tw x th.
Image bilinear_resize(const Image& src, int x0, int y0, int x1, int y1, int tw, int th);

}  // namespace ofa
