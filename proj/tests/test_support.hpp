#pragma once

#include "spectral_ct/geometry.hpp"
#include "spectral_ct/projector.hpp"
#include "spectral_ct/tensor.hpp"

#include <Eigen/Dense>

#include <random>
#include <vector>

namespace sct::testing {

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

template <std::size_t R>
DenseTensor<R> random_tensor(const typename DenseTensor<R>::Dims& dims, std::mt19937_64& rng, double lo = -1.0,
                             double hi = 1.0) {
  DenseTensor<R> t(dims);
  std::uniform_real_distribution<double> d(lo, hi);
  for (double& x : t.data()) x = d(rng);
  return t;
}

/// Small fan-beam scan: n×n pixels of 1 mm, a detector wide enough to see
/// the whole grid, and the given number of uniform views.
inline ScanGeometry small_geometry(std::size_t n, std::size_t views) {
  ScanGeometry g;
  g.image_nx = g.image_ny = n;
  g.pixel_size_mm = 1.0;
  g.source_to_center_mm = 4.0 * static_cast<double>(n);
  g.source_to_detector_mm = 6.0 * static_cast<double>(n);
  g.detector_count = 3 * n;
  g.detector_pitch_mm = 1.0;
  g.view_angles = uniform_angles(views);
  return g;
}

/// System matrix assembled ray by ray from the tracer, rows ordered
/// (view, detector) like the projector's sinograms.
inline Eigen::MatrixXd dense_system_matrix(const ScanGeometry& g) {
  const std::size_t rows = g.view_count() * g.detector_count;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(g.pixel_count()));
  std::vector<RayHit> hits;
  for (std::size_t v = 0; v < g.view_count(); ++v) {
    for (std::size_t j = 0; j < g.detector_count; ++j) {
      hits.clear();
      trace_ray(g, v, j, hits);
      for (const RayHit& h : hits) {
        a(static_cast<Eigen::Index>(v * g.detector_count + j), h.pixel) += h.length_cm;
      }
    }
  }
  return a;
}

inline Eigen::VectorXd to_eigen(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace sct::testing
