#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sct {

/// Flat-panel fan-beam acquisition. Lengths are in millimetres, angles in
/// radians. The source sits at R·(cos θ, sin θ); the detector is centred on
/// the opposite side of the isocenter and is perpendicular to the central ray.
/// Pixel (i1, i2) has its centre at ((i1 − (nx−1)/2)·δ, (i2 − (ny−1)/2)·δ).
struct ScanGeometry {
  double source_to_detector_mm = 180.0;
  double source_to_center_mm = 132.0;
  std::size_t detector_count = 512;
  double detector_pitch_mm = 0.1;
  double detector_offset_mm = 0.0;
  std::vector<double> view_angles;
  std::size_t image_nx = 256;
  std::size_t image_ny = 256;
  double pixel_size_mm = 0.15;

  std::size_t view_count() const noexcept { return view_angles.size(); }
  std::size_t pixel_count() const noexcept { return image_nx * image_ny; }

  /// Lateral position of detector cell j relative to the central ray (mm).
  double detector_position(std::size_t j) const noexcept;

  /// Radius of the disk seen by every view.
  double fov_radius_mm() const;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;

  /// Same scanner restricted to a subset of its views.
  ScanGeometry with_views(std::span<const std::size_t> view_indices) const;
};

std::vector<double> uniform_angles(std::size_t count);

/// 512 × 0.1 mm detector, 180/132 mm, 640 views, 256² at 0.15 mm.
ScanGeometry reference_geometry();

/// Same field of view at 64² / 128 detectors for desk-scale runs.
ScanGeometry desk_geometry(std::size_t views = 640);

/// Indices floor(i·full/count) for i < count; every (full/count)-th view when
/// count divides full.
std::vector<std::size_t> subsample_views(std::size_t full, std::size_t count);

/// View v goes to subset v mod n.
std::vector<std::vector<std::size_t>> ordered_subsets(std::size_t view_count, std::size_t subsets);

}  // namespace sct
