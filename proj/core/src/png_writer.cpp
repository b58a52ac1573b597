#include "spectral_ct/png_writer.hpp"

#include "spectral_ct/tensor_file.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace sct {

namespace {

void append_bytes(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}

void flush_noop(png_structp) {}

std::uint8_t to_byte(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

std::string encode(std::size_t width, std::size_t height, int color_type, const std::vector<std::uint8_t>& pixels) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  std::string out;
  const std::size_t channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  std::vector<png_bytep> rows(height);
  for (std::size_t r = 0; r < height; ++r) {
    rows[r] = const_cast<png_bytep>(pixels.data() + r * width * channels);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("PNG encoding failed");
  }
  png_set_write_fn(png, &out, append_bytes, flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace

std::string encode_png_rgb(const Tensor3& rgb) {
  if (rgb.dim(2) != 3) throw std::invalid_argument("RGB PNG needs three channels");
  const std::size_t w = rgb.dim(0);
  const std::size_t h = rgb.dim(1);
  std::vector<std::uint8_t> px(w * h * 3);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t k = 0; k < 3; ++k) px[(r * w + c) * 3 + k] = to_byte(rgb(c, r, k));
    }
  }
  return encode(w, h, PNG_COLOR_TYPE_RGB, px);
}

std::string encode_png_gray(const Tensor2& img, double lo, double hi) {
  if (!(hi > lo)) throw std::invalid_argument("grayscale PNG needs hi > lo");
  const std::size_t w = img.dim(0);
  const std::size_t h = img.dim(1);
  std::vector<std::uint8_t> px(w * h);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) px[r * w + c] = to_byte((img(c, r) - lo) / (hi - lo));
  }
  return encode(w, h, PNG_COLOR_TYPE_GRAY, px);
}

void write_png_rgb(const std::filesystem::path& path, const Tensor3& rgb) {
  write_file_atomic(path, encode_png_rgb(rgb));
}

void write_png_gray(const std::filesystem::path& path, const Tensor2& img, double lo, double hi) {
  write_file_atomic(path, encode_png_gray(img, lo, hi));
}

}  // namespace sct
