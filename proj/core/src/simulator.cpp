#include "spectral_ct/simulator.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sct {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

bool inside(const EllipseShape& e, double x, double y) {
  const double dx = x - e.center_x_mm;
  const double dy = y - e.center_y_mm;
  const double c = std::cos(e.rotation_rad);
  const double s = std::sin(e.rotation_rad);
  const double xr = dx * c + dy * s;
  const double yr = -dx * s + dy * c;
  const double q = (xr / e.axis_x_mm) * (xr / e.axis_x_mm) + (yr / e.axis_y_mm) * (yr / e.axis_y_mm);
  return q <= 1.0;
}

}  // namespace

PhantomSpec thorax_phantom(std::size_t nx, std::size_t ny, double pixel_size_mm) {
  constexpr std::size_t soft = 0;
  constexpr std::size_t bone = 1;
  constexpr std::size_t iodine = 2;
  constexpr double iodine_fraction = 0.012;
  PhantomSpec spec;
  spec.nx = nx;
  spec.ny = ny;
  spec.pixel_size_mm = pixel_size_mm;
  auto add = [&](double cx, double cy, double ax, double ay, double rot, std::size_t mat, double frac) {
    spec.shapes.push_back({cx, cy, ax, ay, rot, mat, frac});
  };
  add(0.0, 0.0, 15.0, 12.0, 0.0, soft, 1.0);
  add(-6.5, 1.5, 4.5, 6.5, 0.2, soft, 0.25);
  add(6.5, 1.5, 4.5, 6.5, -0.2, soft, 0.25);
  add(1.5, -1.5, 3.5, 3.0, 0.3, iodine, iodine_fraction);
  add(-1.5, 4.0, 1.3, 1.3, 0.0, iodine, iodine_fraction);
  add(-6.0, 4.5, 0.9, 0.9, 0.0, iodine, iodine_fraction);
  add(6.5, -1.0, 0.9, 0.9, 0.0, iodine, iodine_fraction);
  add(-7.0, -2.0, 1.2, 1.2, 0.0, soft, 1.0);
  add(0.0, -8.5, 2.2, 2.0, 0.0, bone, 1.0);
  for (double deg : {35.0, 70.0, 110.0, 145.0, 215.0, 325.0}) {
    const double a = deg * std::numbers::pi / 180.0;
    add(13.2 * std::cos(a), 10.4 * std::sin(a), 0.8, 0.8, 0.0, bone, 1.0);
  }
  return spec;
}

PhantomImages rasterize_phantom(const PhantomSpec& spec, const MaterialBasis& basis) {
  basis.validate();
  const std::size_t M = basis.materials();
  const std::size_t S = basis.channels();
  for (const auto& e : spec.shapes) {
    if (e.material >= M) {
      throw std::invalid_argument("phantom shape uses material " + std::to_string(e.material) + " but basis has " +
                                  std::to_string(M));
    }
    if (!(e.fraction >= 0.0 && e.fraction <= 1.0)) throw std::invalid_argument("shape fraction must lie in [0, 1]");
    if (!(e.axis_x_mm > 0.0 && e.axis_y_mm > 0.0)) throw std::invalid_argument("ellipse axes must be positive");
  }
  PhantomImages out{Tensor3({spec.nx, spec.ny, S}), Tensor3({spec.nx, spec.ny, M})};
  const double cx = 0.5 * static_cast<double>(spec.nx - 1);
  const double cy = 0.5 * static_cast<double>(spec.ny - 1);
  for (std::size_t i2 = 0; i2 < spec.ny; ++i2) {
    const double y = (static_cast<double>(i2) - cy) * spec.pixel_size_mm;
    for (std::size_t i1 = 0; i1 < spec.nx; ++i1) {
      const double x = (static_cast<double>(i1) - cx) * spec.pixel_size_mm;
      for (const auto& e : spec.shapes) {
        if (!inside(e, x, y)) continue;
        for (std::size_t m = 0; m < M; ++m) out.fractions(i1, i2, m) = 0.0;
        out.fractions(i1, i2, e.material) = e.fraction;
      }
      for (std::size_t s = 0; s < S; ++s) {
        double v = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
          v += basis.mu(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(m)) * out.fractions(i1, i2, m);
        }
        out.spectral(i1, i2, s) = v;
      }
    }
  }
  return out;
}

std::vector<double> DoseModel::weights(std::size_t channels) const {
  if (channel_weights.empty()) return std::vector<double>(channels, 1.0 / static_cast<double>(channels));
  if (channel_weights.size() != channels) {
    throw std::invalid_argument("dose has " + std::to_string(channel_weights.size()) + " channel weights for " +
                                std::to_string(channels) + " channels");
  }
  double sum = 0.0;
  for (double w : channel_weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("channel weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("channel weights must sum to 1");
  return channel_weights;
}

std::mt19937_64 ray_stream(std::uint64_t seed, std::size_t channel, std::size_t view) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ (0x632BE59BD9B4E019ULL * (channel + 1)));
  const std::uint64_t c = splitmix64(b ^ (0x85157AF5ULL * (view + 1)));
  return std::mt19937_64(c);
}

double measure_ray(double line_integral, double incident, std::mt19937_64& rng, double clamp) {
  std::poisson_distribution<long long> poisson(incident * std::exp(-line_integral));
  const double counts = std::max(static_cast<double>(poisson(rng)), clamp);
  return -std::log(counts / incident);
}

Tensor3 simulate_sinograms(const Tensor3& truth, const Projector& projector, const DoseModel& dose, bool noisy) {
  const auto& g = projector.geometry();
  if (truth.dim(0) != g.image_nx || truth.dim(1) != g.image_ny) {
    throw std::invalid_argument("truth image dims do not match scan geometry");
  }
  if (!(dose.photons_per_ray > 0.0)) throw std::invalid_argument("photons_per_ray must be positive");
  if (!(dose.zero_count_clamp > 0.0)) throw std::invalid_argument("zero-count clamp must be positive");
  const std::size_t S = truth.dim(2);
  const auto weights = dose.weights(S);

  // Everything with attenuation must be seen by every view.
  const double fov = g.fov_radius_mm();
  const double cx = 0.5 * static_cast<double>(g.image_nx - 1);
  const double cy = 0.5 * static_cast<double>(g.image_ny - 1);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t i2 = 0; i2 < g.image_ny; ++i2) {
      for (std::size_t i1 = 0; i1 < g.image_nx; ++i1) {
        if (truth(i1, i2, s) == 0.0) continue;
        const double x = (static_cast<double>(i1) - cx) * g.pixel_size_mm;
        const double y = (static_cast<double>(i2) - cy) * g.pixel_size_mm;
        if (std::hypot(x, y) > fov) throw std::invalid_argument("object support extends outside the field of view");
      }
    }
  }

  const std::size_t J = g.detector_count;
  const std::size_t V = g.view_count();
  Tensor3 sino({J, V, S});
  for (std::size_t s = 0; s < S; ++s) {
    auto clean = projector.forward(truth.slab(s));
    auto out = sino.slab(s);
    if (!noisy) {
      std::copy(clean.begin(), clean.end(), out.begin());
      continue;
    }
    const double incident = dose.photons_per_ray * weights[s];
    if (!(incident > 0.0)) throw std::invalid_argument("channel " + std::to_string(s) + " receives no photons");
    for (std::size_t v = 0; v < V; ++v) {
      auto rng = ray_stream(dose.seed, s, v);
      for (std::size_t j = 0; j < J; ++j) {
        out[v * J + j] = measure_ray(clean[v * J + j], incident, rng, dose.zero_count_clamp);
      }
    }
  }
  return sino;
}

}  // namespace sct
