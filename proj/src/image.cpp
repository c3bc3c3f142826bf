#include "ofa/image.hpp"

#include "ofa/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>

namespace ofa {

void Image::fill(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  for (std::size_t i = 0; i + 2 < pixels.size(); i += 3) {
    pixels[i] = r;
    pixels[i + 1] = g;
    pixels[i + 2] = b;
  }
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(
      std::accumulate(bits.begin(), bits.end(), std::size_t{0}));
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const std::string& path, const Image& image) {
  if (image.width <= 0 || image.height <= 0 ||
      image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
    throw DataError("write_png: inconsistent image buffer for " + path);
  }
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw DataError("write_png: cannot open " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("write_png: libpng failure on " + path);
  }
  png_init_io(png, f.get());
  // Fixed codec settings keep output bytes reproducible.
  png_set_compression_level(png, 4);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(image.at(0, y)));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw DataError("read_png: cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("read_png: libpng failure on " + path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  if (png_get_rowbytes(png, info) != static_cast<std::size_t>(w) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("read_png: unsupported pixel layout in " + path);
  }
  Image image(w, h);
  for (int y = 0; y < h; ++y) {
    png_read_row(png, image.at(0, y), nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void write_mask_png(const std::string& path, const Mask& mask) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw DataError("write_mask_png: cannot open " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("write_mask_png: libpng failure on " + path);
  }
  png_init_io(png, f.get());
  png_set_compression_level(png, 4);
  png_set_IHDR(png, info, static_cast<png_uint_32>(mask.width),
               static_cast<png_uint_32>(mask.height), 1, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const int row_bytes = (mask.width + 7) / 8;
  std::vector<std::uint8_t> row(static_cast<std::size_t>(row_bytes));
  for (int y = 0; y < mask.height; ++y) {
    std::fill(row.begin(), row.end(), 0);
    for (int x = 0; x < mask.width; ++x) {
      if (mask.bits[static_cast<std::size_t>(y) * mask.width + x]) {
        row[static_cast<std::size_t>(x / 8)] |= static_cast<std::uint8_t>(0x80 >> (x % 8));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image bilinear_resize(const Image& src, int x0, int y0, int x1, int y1, int tw, int th) {
  if (x0 > x1 || y0 > y1 || tw <= 0 || th <= 0) {
    throw DataError("bilinear_resize: empty source region or target");
  }
  const int rw = x1 - x0 + 1;
  const int rh = y1 - y0 + 1;
  const double sx = static_cast<double>(rw) / tw;
  const double sy = static_cast<double>(rh) / th;

  Image out(tw, th);
  for (int ty = 0; ty < th; ++ty) {
    // Pixel-center alignment: identity mapping when sizes match.
    double fy = y0 + (ty + 0.5) * sy - 0.5;
    fy = std::clamp(fy, static_cast<double>(y0), static_cast<double>(y1));
    const int iy = std::min(static_cast<int>(std::floor(fy)), y1 - (rh > 1 ? 1 : 0));
    const double wy = fy - iy;
    for (int tx = 0; tx < tw; ++tx) {
      double fx = x0 + (tx + 0.5) * sx - 0.5;
      fx = std::clamp(fx, static_cast<double>(x0), static_cast<double>(x1));
      const int ix = std::min(static_cast<int>(std::floor(fx)), x1 - (rw > 1 ? 1 : 0));
      const double wx = fx - ix;

      const std::uint8_t* p00 = src.at(ix, iy);
      const std::uint8_t* p10 = src.at(std::min(ix + 1, x1), iy);
      const std::uint8_t* p01 = src.at(ix, std::min(iy + 1, y1));
      const std::uint8_t* p11 = src.at(std::min(ix + 1, x1), std::min(iy + 1, y1));
      std::uint8_t* dst = out.at(tx, ty);
      for (int c = 0; c < 3; ++c) {
        const double v = (1.0 - wy) * ((1.0 - wx) * p00[c] + wx * p10[c]) +
                         wy * ((1.0 - wx) * p01[c] + wx * p11[c]);
        dst[c] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return out;
}

}  // namespace ofa
