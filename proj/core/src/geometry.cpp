#include "spectral_ct/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sct {

double ScanGeometry::detector_position(std::size_t j) const noexcept {
  return (static_cast<double>(j) - 0.5 * static_cast<double>(detector_count - 1)) * detector_pitch_mm +
         detector_offset_mm;
}

double ScanGeometry::fov_radius_mm() const {
  const double half = 0.5 * static_cast<double>(detector_count) * detector_pitch_mm;
  const double edge = std::min(std::abs(half + detector_offset_mm), std::abs(half - detector_offset_mm));
  const double gamma = std::atan(edge / source_to_detector_mm);
  return source_to_center_mm * std::sin(gamma);
}

void ScanGeometry::validate() const {
  if (!(source_to_center_mm > 0.0)) throw std::invalid_argument("source_to_center must be positive");
  if (!(source_to_detector_mm > source_to_center_mm)) {
    throw std::invalid_argument("source_to_detector must exceed source_to_center");
  }
  if (detector_count == 0) throw std::invalid_argument("detector_count must be positive");
  if (!(detector_pitch_mm > 0.0)) throw std::invalid_argument("detector_pitch must be positive");
  if (view_angles.empty()) throw std::invalid_argument("geometry needs at least one view");
  for (std::size_t v = 1; v < view_angles.size(); ++v) {
    if (!(view_angles[v] > view_angles[v - 1])) throw std::invalid_argument("view angles must be strictly increasing");
  }
  if (image_nx == 0 || image_ny == 0) throw std::invalid_argument("image dims must be positive");
  if (!(pixel_size_mm > 0.0)) throw std::invalid_argument("pixel_size must be positive");
  const double half_extent = 0.5 * static_cast<double>(std::max(image_nx, image_ny)) * pixel_size_mm;
  if (half_extent >= source_to_center_mm) throw std::invalid_argument("image grid reaches the source orbit");
}

ScanGeometry ScanGeometry::with_views(std::span<const std::size_t> view_indices) const {
  ScanGeometry out = *this;
  out.view_angles.clear();
  out.view_angles.reserve(view_indices.size());
  for (std::size_t v : view_indices) {
    if (v >= view_angles.size()) throw std::out_of_range("view index " + std::to_string(v) + " out of range");
    out.view_angles.push_back(view_angles[v]);
  }
  return out;
}

std::vector<double> uniform_angles(std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t v = 0; v < count; ++v) {
    out[v] = 2.0 * std::numbers::pi * static_cast<double>(v) / static_cast<double>(count);
  }
  return out;
}

ScanGeometry reference_geometry() {
  ScanGeometry g;
  g.view_angles = uniform_angles(640);
  return g;
}

ScanGeometry desk_geometry(std::size_t views) {
  ScanGeometry g;
  g.detector_count = 128;
  g.detector_pitch_mm = 0.4;
  g.image_nx = 64;
  g.image_ny = 64;
  g.pixel_size_mm = 0.6;
  g.view_angles = uniform_angles(views);
  return g;
}

std::vector<std::size_t> subsample_views(std::size_t full, std::size_t count) {
  if (count == 0 || count > full) {
    throw std::invalid_argument("cannot take " + std::to_string(count) + " views out of " + std::to_string(full));
  }
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = i * full / count;
  return out;
}

std::vector<std::vector<std::size_t>> ordered_subsets(std::size_t view_count, std::size_t subsets) {
  if (subsets == 0 || subsets > view_count) {
    throw std::invalid_argument("subset count " + std::to_string(subsets) + " invalid for " +
                                std::to_string(view_count) + " views");
  }
  std::vector<std::vector<std::size_t>> out(subsets);
  for (std::size_t v = 0; v < view_count; ++v) out[v % subsets].push_back(v);
  return out;
}

}  // namespace sct
