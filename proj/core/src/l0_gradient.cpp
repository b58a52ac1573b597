#include "spectral_ct/l0_gradient.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace sct {

L0Schedule L0Schedule::for_lambda(double lambda_star) {
  L0Schedule s;
  s.lambda_star = lambda_star;
  s.tau0 = 2.0 * lambda_star;
  return s;
}

void L0Schedule::validate() const {
  if (!(lambda_star >= 0.0) || !std::isfinite(lambda_star)) throw std::invalid_argument("lambda_star must be >= 0");
  if (!(growth > 1.0)) throw std::invalid_argument("tau growth factor must exceed 1");
  if (!(tau_max > 0.0) || !std::isfinite(tau_max)) throw std::invalid_argument("tau_max must be positive");
  if (lambda_star > 0.0 && !(tau0 > 0.0)) throw std::invalid_argument("tau0 must be positive when lambda_star > 0");
}

std::size_t gradient_l0_norm(const Tensor2& x) {
  std::size_t count = 0;
  for (std::size_t j = 0; j < x.dim(1); ++j) {
    for (std::size_t i = 0; i < x.dim(0); ++i) {
      const double dx = i > 0 ? x(i, j) - x(i - 1, j) : 0.0;
      const double dy = j > 0 ? x(i, j) - x(i, j - 1) : 0.0;
      if (std::abs(dx) + std::abs(dy) != 0.0) ++count;
    }
  }
  return count;
}

GradientPair periodic_gradient(const Tensor2& u) {
  const std::size_t nx = u.dim(0);
  const std::size_t ny = u.dim(1);
  GradientPair g{Tensor2(u.dims()), Tensor2(u.dims())};
  for (std::size_t j = 0; j < ny; ++j) {
    const std::size_t jm = j == 0 ? ny - 1 : j - 1;
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t im = i == 0 ? nx - 1 : i - 1;
      g.h(i, j) = u(i, j) - u(im, j);
      g.v(i, j) = u(i, j) - u(i, jm);
    }
  }
  return g;
}

GradientPair hard_threshold(const Tensor2& gx, const Tensor2& gy, double threshold) {
  if (gx.dims() != gy.dims()) throw std::invalid_argument("hard_threshold: gradient dims differ");
  if (!(threshold >= 0.0)) throw std::invalid_argument("hard_threshold: threshold must be >= 0");
  GradientPair out{gx, gy};
  auto h = out.h.data();
  auto v = out.v.data();
  for (std::size_t p = 0; p < h.size(); ++p) {
    if (h[p] * h[p] + v[p] * v[p] <= threshold) {
      h[p] = 0.0;
      v[p] = 0.0;
    }
  }
  return out;
}

double l0_penalized_energy(const Tensor2& u, const Tensor2& w, double lambda_star, double tau) {
  if (u.dims() != w.dims()) throw std::invalid_argument("l0_penalized_energy: dims differ");
  double e = 0.0;
  for (std::size_t p = 0; p < u.size(); ++p) {
    const double d = u.data()[p] - w.data()[p];
    e += d * d;
  }
  const GradientPair g = periodic_gradient(u);
  for (std::size_t p = 0; p < u.size(); ++p) {
    const double m2 = g.h.data()[p] * g.h.data()[p] + g.v.data()[p] * g.v.data()[p];
    // min over {(0,0), (gx,gy)} of τ·‖g − (h,v)‖² + λ*·[(h,v) ≠ 0]
    e += (tau * m2 <= lambda_star) ? tau * m2 : lambda_star;
  }
  return e;
}

struct L0Smoother::Plans {
  double* real = nullptr;
  fftw_complex* freq = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  std::vector<double> laplacian;  // |F∂x|² + |F∂y|² per frequency bin

  ~Plans() {
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
    fftw_free(real);
    fftw_free(freq);
  }
};

L0Smoother::L0Smoother(std::size_t nx, std::size_t ny) : nx_(nx), ny_(ny), plans_(std::make_unique<Plans>()) {
  if (nx == 0 || ny == 0) throw std::invalid_argument("L0Smoother: image dims must be positive");
  const std::size_t half = nx / 2 + 1;
  plans_->real = fftw_alloc_real(nx * ny);
  plans_->freq = fftw_alloc_complex(half * ny);
  if (!plans_->real || !plans_->freq) throw std::bad_alloc();
  // Storage is i1-fastest, so FFTW sees an ny × nx row-major array.
  plans_->forward = fftw_plan_dft_r2c_2d(static_cast<int>(ny), static_cast<int>(nx), plans_->real, plans_->freq,
                                         FFTW_ESTIMATE);
  plans_->backward = fftw_plan_dft_c2r_2d(static_cast<int>(ny), static_cast<int>(nx), plans_->freq, plans_->real,
                                          FFTW_ESTIMATE);
  if (!plans_->forward || !plans_->backward) throw std::runtime_error("FFTW plan creation failed");
  plans_->laplacian.resize(half * ny);
  for (std::size_t k2 = 0; k2 < ny; ++k2) {
    const double ly = 2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k2) / static_cast<double>(ny));
    for (std::size_t k1 = 0; k1 < half; ++k1) {
      const double lx =
          2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k1) / static_cast<double>(nx));
      plans_->laplacian[k2 * half + k1] = lx + ly;
    }
  }
}

L0Smoother::~L0Smoother() = default;

Tensor2 L0Smoother::solve(const Tensor2& w, const GradientPair& pair, double tau) {
  const Tensor2::Dims dims{nx_, ny_};
  if (w.dims() != dims || pair.h.dims() != dims || pair.v.dims() != dims) {
    throw std::invalid_argument("L0Smoother::solve: image dims do not match the workspace");
  }
  if (!(tau >= 0.0)) throw std::invalid_argument("L0Smoother::solve: tau must be >= 0");
  // Right-hand side w + τ(∂xᵀh + ∂yᵀv); the adjoint of a periodic backward
  // difference is a periodic forward difference with the sign flipped.
  double* rhs = plans_->real;
  for (std::size_t j = 0; j < ny_; ++j) {
    const std::size_t jp = j + 1 == ny_ ? 0 : j + 1;
    for (std::size_t i = 0; i < nx_; ++i) {
      const std::size_t ip = i + 1 == nx_ ? 0 : i + 1;
      const double adj = pair.h(i, j) - pair.h(ip, j) + pair.v(i, j) - pair.v(i, jp);
      rhs[j * nx_ + i] = w(i, j) + tau * adj;
    }
  }
  fftw_execute(plans_->forward);
  const double norm = 1.0 / static_cast<double>(nx_ * ny_);
  for (std::size_t k = 0; k < plans_->laplacian.size(); ++k) {
    const double scale = norm / (1.0 + tau * plans_->laplacian[k]);
    plans_->freq[k][0] *= scale;
    plans_->freq[k][1] *= scale;
  }
  fftw_execute(plans_->backward);
  Tensor2 u(dims);
  std::copy(plans_->real, plans_->real + nx_ * ny_, u.data().begin());
  return u;
}

Tensor2 L0Smoother::smooth(const Tensor2& w, const L0Schedule& sched) {
  sched.validate();
  if (sched.lambda_star == 0.0) return w;
  Tensor2 u = w;
  for (double tau = sched.tau0; tau <= sched.tau_max; tau *= sched.growth) {
    const GradientPair g = periodic_gradient(u);
    const GradientPair pair = hard_threshold(g.h, g.v, sched.lambda_star / tau);
    u = solve(w, pair, tau);
  }
  return u;
}

Tensor2 fft_quadratic_solve(const Tensor2& w, const GradientPair& pair, double tau) {
  L0Smoother s(w.dim(0), w.dim(1));
  return s.solve(w, pair, tau);
}

Tensor2 l0_smooth(const Tensor2& w, const L0Schedule& sched) {
  L0Smoother s(w.dim(0), w.dim(1));
  return s.smooth(w, sched);
}

}  // namespace sct
