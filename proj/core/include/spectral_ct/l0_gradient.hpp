#pragma once

#include "spectral_ct/tensor.hpp"

#include <cstddef>
#include <memory>

namespace sct {

/// Auxiliary gradient images (h, v) of the ℓ0 smoothing subproblem.
struct GradientPair {
  Tensor2 h;
  Tensor2 v;
};

struct L0Schedule {
  double lambda_star = 0.0;
  double tau0 = 0.0;
  double tau_max = 1e5;
  double growth = 1.1;

  /// Schedule with the default start τ0 = 2λ*.
  static L0Schedule for_lambda(double lambda_star);
  void validate() const;
};

/// Number of pixels whose backward differences along i1 or i2 are nonzero.
/// Differences on the first row and column are taken as zero.
std::size_t gradient_l0_norm(const Tensor2& x);

/// Periodic backward differences (∂x along i1, ∂y along i2).
GradientPair periodic_gradient(const Tensor2& u);

/// Per pixel: (0, 0) when gx² + gy² ≤ threshold, otherwise (gx, gy).
GradientPair hard_threshold(const Tensor2& gx, const Tensor2& gy, double threshold);

/// ‖u − w‖² + λ*·#{(h,v) ≠ 0} + τ‖∇u − (h,v)‖² with the optimal (h, v) for u.
double l0_penalized_energy(const Tensor2& u, const Tensor2& w, double lambda_star, double tau);

/// Reusable FFT workspace for one image size.
class L0Smoother {
 public:
  L0Smoother(std::size_t nx, std::size_t ny);
  ~L0Smoother();
  L0Smoother(const L0Smoother&) = delete;
  L0Smoother& operator=(const L0Smoother&) = delete;

  /// argmin_u ‖u − w‖² + τ‖∇u − (h, v)‖² with periodic differences.
  Tensor2 solve(const Tensor2& w, const GradientPair& pair, double tau);

  /// Continuation from τ0 to τ_max: threshold the gradients of u, solve for
  /// u, grow τ. u starts at w.
  Tensor2 smooth(const Tensor2& w, const L0Schedule& sched);

 private:
  struct Plans;
  std::size_t nx_;
  std::size_t ny_;
  std::unique_ptr<Plans> plans_;
};

Tensor2 fft_quadratic_solve(const Tensor2& w, const GradientPair& pair, double tau);
Tensor2 l0_smooth(const Tensor2& w, const L0Schedule& sched);

}  // namespace sct
