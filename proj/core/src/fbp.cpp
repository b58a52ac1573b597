#include "spectral_ct/fbp.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sct {

namespace {

constexpr double kMmToCm = 0.1;

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Angular weight of each view: half the gap to its neighbours on the circle.
std::vector<double> angular_weights(const std::vector<double>& angles) {
  const std::size_t n = angles.size();
  std::vector<double> w(n);
  if (n == 1) {
    w[0] = 2.0 * std::numbers::pi;
    return w;
  }
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t v = 0; v < n; ++v) {
    const double prev = v == 0 ? angles[n - 1] - two_pi : angles[v - 1];
    const double next = v + 1 == n ? angles[0] + two_pi : angles[v + 1];
    w[v] = 0.5 * (next - prev);
  }
  return w;
}

// Frequency response of the discrete ramp kernel sampled at spacing ds on a
// zero-padded grid of length m, optionally apodized.
std::vector<double> ramp_response(std::size_t m, double ds, FbpFilter filter) {
  std::vector<double> kernel(m, 0.0);
  const double pi2 = std::numbers::pi * std::numbers::pi;
  kernel[0] = 1.0 / (4.0 * ds * ds);
  for (std::size_t n = 1; n < m / 2; ++n) {
    if (n % 2 == 1) {
      const double val = -1.0 / (static_cast<double>(n * n) * pi2 * ds * ds);
      kernel[n] = val;
      kernel[m - n] = val;
    }
  }
  const std::size_t bins = m / 2 + 1;
  std::unique_ptr<fftw_complex, FftwFree> spec(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));
  fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(m), kernel.data(), spec.get(), FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
  std::vector<double> response(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    double h = spec.get()[k][0];
    if (filter == FbpFilter::hann) {
      const double f = static_cast<double>(k) / static_cast<double>(m / 2);
      h *= 0.5 * (1.0 + std::cos(std::numbers::pi * f));
    }
    response[k] = h;
  }
  return response;
}

}  // namespace

std::vector<double> fbp_reconstruct(std::span<const double> sinogram, const ScanGeometry& g, FbpFilter filter) {
  g.validate();
  const std::size_t J = g.detector_count;
  const std::size_t V = g.view_count();
  if (sinogram.size() != J * V) {
    throw std::invalid_argument("fbp: sinogram has " + std::to_string(sinogram.size()) + " values, expected " +
                                std::to_string(J * V));
  }

  // Work in centimetres on the virtual detector through the isocenter.
  const double R = g.source_to_center_mm * kMmToCm;
  const double D = g.source_to_detector_mm * kMmToCm;
  const double mag = R / D;
  const double ds = g.detector_pitch_mm * kMmToCm * mag;
  const double s0 = g.detector_position(0) * kMmToCm * mag;

  const std::size_t m = next_pow2(2 * J);
  const auto response = ramp_response(m, ds, filter);
  const std::size_t bins = m / 2 + 1;

  std::vector<double> line(m);
  std::unique_ptr<fftw_complex, FftwFree> spec(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));
  fftw_plan fwd = fftw_plan_dft_r2c_1d(static_cast<int>(m), line.data(), spec.get(), FFTW_ESTIMATE);
  fftw_plan inv = fftw_plan_dft_c2r_1d(static_cast<int>(m), spec.get(), line.data(), FFTW_ESTIMATE);

  std::vector<double> cosine(J);
  for (std::size_t j = 0; j < J; ++j) {
    const double s = s0 + static_cast<double>(j) * ds;
    cosine[j] = R / std::sqrt(R * R + s * s);
  }

  // Filtered projections q(s) = ds · (p_w ∗ h)(s) · ½ (full-scan redundancy).
  std::vector<double> filtered(J * V);
  for (std::size_t v = 0; v < V; ++v) {
    std::fill(line.begin(), line.end(), 0.0);
    for (std::size_t j = 0; j < J; ++j) line[j] = sinogram[v * J + j] * cosine[j];
    fftw_execute(fwd);
    for (std::size_t k = 0; k < bins; ++k) {
      spec.get()[k][0] *= response[k];
      spec.get()[k][1] *= response[k];
    }
    fftw_execute(inv);
    const double scale = ds * 0.5 / static_cast<double>(m);
    for (std::size_t j = 0; j < J; ++j) filtered[v * J + j] = line[j] * scale;
  }
  fftw_destroy_plan(fwd);
  fftw_destroy_plan(inv);

  const auto dbeta = angular_weights(g.view_angles);
  const double delta = g.pixel_size_mm * kMmToCm;
  const double cx = 0.5 * static_cast<double>(g.image_nx - 1);
  const double cy = 0.5 * static_cast<double>(g.image_ny - 1);
  std::vector<double> image(g.pixel_count(), 0.0);
  for (std::size_t v = 0; v < V; ++v) {
    const double c = std::cos(g.view_angles[v]);
    const double sn = std::sin(g.view_angles[v]);
    const double* q = &filtered[v * J];
    for (std::size_t i2 = 0; i2 < g.image_ny; ++i2) {
      const double y = (static_cast<double>(i2) - cy) * delta;
      for (std::size_t i1 = 0; i1 < g.image_nx; ++i1) {
        const double x = (static_cast<double>(i1) - cx) * delta;
        const double U = R - (x * c + y * sn);
        const double lateral = -x * sn + y * c;
        const double s = R * lateral / U;
        const double u = (s - s0) / ds;
        const double fl = std::floor(u);
        const auto j0 = static_cast<long>(fl);
        if (j0 < -1 || j0 >= static_cast<long>(J)) continue;
        const double frac = u - fl;
        double val = 0.0;
        if (j0 >= 0) val += (1.0 - frac) * q[j0];
        if (j0 + 1 < static_cast<long>(J)) val += frac * q[j0 + 1];
        image[i1 + g.image_nx * i2] += dbeta[v] * (R * R) / (U * U) * val;
      }
    }
  }
  return image;
}

}  // namespace sct
