#pragma once

#include "spectral_ct/projector.hpp"
#include "spectral_ct/tensor.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace sct {

/// Linear attenuation (cm⁻¹) of M basis materials in S energy channels.
struct MaterialBasis {
  std::vector<std::string> names;
  Eigen::MatrixXd mu;                ///< S × M
  std::vector<double> channel_edges; ///< S+1 energies in keV

  std::size_t channels() const noexcept { return static_cast<std::size_t>(mu.rows()); }
  std::size_t materials() const noexcept { return static_cast<std::size_t>(mu.cols()); }
  std::size_t index_of(const std::string& name) const;
  void validate() const;
};

/// Energy-bin edges of the eight-channel 50 kVp protocol, in keV.
std::vector<double> reference_channel_edges();

/// Merge adjacent reference bins pairwise into four channels for desk runs.
std::vector<double> desk_channel_edges();

/// Names with tabulated mass-attenuation data: "soft", "bone", "iodine",
/// "water".
std::vector<std::string> known_materials();

/// Channel attenuation at each bin's centre energy, interpolated log-log in a
/// transcribed NIST XCOM mass-attenuation table and scaled by density.
MaterialBasis xcom_basis(const std::vector<std::string>& names, const std::vector<double>& channel_edges);

struct EllipseShape {
  double center_x_mm = 0.0;
  double center_y_mm = 0.0;
  double axis_x_mm = 1.0;
  double axis_y_mm = 1.0;
  double rotation_rad = 0.0;
  std::size_t material = 0;
  double fraction = 1.0;
};

/// Shapes are painted in order; a later shape replaces the material content
/// of every pixel whose centre it covers.
struct PhantomSpec {
  std::vector<EllipseShape> shapes;
  std::size_t nx = 64;
  std::size_t ny = 64;
  double pixel_size_mm = 0.6;
};

/// Soft-tissue body with lungs, spine, ribs, and iodine-filled vessels
/// (1.2% iodine). Material indices follow the order soft, bone, iodine.
PhantomSpec thorax_phantom(std::size_t nx, std::size_t ny, double pixel_size_mm);

struct PhantomImages {
  Tensor3 spectral;  ///< nx × ny × S, cm⁻¹
  Tensor3 fractions; ///< nx × ny × M
};

PhantomImages rasterize_phantom(const PhantomSpec& spec, const MaterialBasis& basis);

struct DoseModel {
  double photons_per_ray = 5000.0;
  std::vector<double> channel_weights;  ///< empty means uniform 1/S
  std::uint64_t seed = 1;
  double zero_count_clamp = 0.5;

  std::vector<double> weights(std::size_t channels) const;
};

/// Independent stream for (seed, channel, view).
std::mt19937_64 ray_stream(std::uint64_t seed, std::size_t channel, std::size_t view);

/// One Poisson measurement of a ray with line integral p and incident counts
/// n0: counts ~ Poisson(n0·e^{−p}), clamped below, then −ln(counts/n0).
double measure_ray(double line_integral, double incident, std::mt19937_64& rng, double clamp);

/// Per-channel sinograms (detectors × views × S) of the truth image. Without
/// noise the result is the exact forward projection.
Tensor3 simulate_sinograms(const Tensor3& truth, const Projector& projector, const DoseModel& dose, bool noisy);

}  // namespace sct
