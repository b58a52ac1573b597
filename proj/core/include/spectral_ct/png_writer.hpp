#pragma once

#include "spectral_ct/tensor.hpp"

#include <filesystem>
#include <string>

namespace sct {

/// 8-bit PNG of an (nx, ny, 3) image with values in [0, 1] (clamped).
/// Row r of the file is i2 = r.
std::string encode_png_rgb(const Tensor3& rgb);
/// 8-bit grayscale PNG mapping [lo, hi] linearly to [0, 255].
std::string encode_png_gray(const Tensor2& img, double lo, double hi);

void write_png_rgb(const std::filesystem::path& path, const Tensor3& rgb);
void write_png_gray(const std::filesystem::path& path, const Tensor2& img, double lo, double hi);

}  // namespace sct
