#pragma once

#include "spectral_ct/geometry.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sct {

/// One pixel crossed by a ray: flat pixel index (i1 + nx·i2) and chord length
/// in centimetres, so attenuation in cm⁻¹ integrates to a dimensionless value.
struct RayHit {
  std::uint32_t pixel;
  double length_cm;
};

/// Exact ray/pixel intersection lengths (Siddon) for the ray from the source
/// to the centre of detector cell `det` at view `view`. Hits are appended in
/// order of increasing distance from the source.
void trace_ray(const ScanGeometry& g, std::size_t view, std::size_t det, std::vector<RayHit>& hits);

/// Fan-beam system matrix A with one ray per detector cell. The rows are
/// traced once at construction and kept in compressed form; forward and back
/// projection use the same stored weights, so they are an exact adjoint pair.
///
/// Sinograms are laid out detector-fastest, then view, for the views passed in.
class Projector {
 public:
  explicit Projector(ScanGeometry geometry);

  const ScanGeometry& geometry() const noexcept { return geometry_; }
  std::size_t detector_count() const noexcept { return geometry_.detector_count; }
  std::size_t view_count() const noexcept { return geometry_.view_count(); }
  std::size_t pixel_count() const noexcept { return geometry_.pixel_count(); }
  std::size_t nonzeros() const noexcept { return pixels_.size(); }

  const std::vector<std::size_t>& all_views() const noexcept { return all_views_; }

  std::vector<double> forward(std::span<const double> image, std::span<const std::size_t> views) const;
  std::vector<double> forward(std::span<const double> image) const { return forward(image, all_views_); }

  std::vector<double> back(std::span<const double> sinogram, std::span<const std::size_t> views) const;
  std::vector<double> back(std::span<const double> sinogram) const { return back(sinogram, all_views_); }

  /// Aᵀ(A·1) restricted to the given views: the separable-surrogate curvature.
  std::vector<double> sqs_denominator(std::span<const std::size_t> views) const;
  std::vector<double> sqs_denominator() const { return sqs_denominator(all_views_); }

  /// Stored row of ray (view, det).
  std::span<const std::uint32_t> row_pixels(std::size_t view, std::size_t det) const;
  std::span<const double> row_weights(std::size_t view, std::size_t det) const;

 private:
  void check_views(std::span<const std::size_t> views) const;
  std::size_t row(std::size_t view, std::size_t det) const { return view * geometry_.detector_count + det; }

  ScanGeometry geometry_;
  std::vector<std::size_t> all_views_;
  std::vector<std::size_t> row_start_;
  std::vector<std::uint32_t> pixels_;
  std::vector<double> weights_;
};

}  // namespace sct
