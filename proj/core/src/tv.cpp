#include "spectral_ct/recon.hpp"

#include <cmath>

namespace sct {

double tv_seminorm(const Tensor2& x) {
  double tv = 0.0;
  for (std::size_t j = 0; j < x.dim(1); ++j) {
    for (std::size_t i = 0; i < x.dim(0); ++i) {
      const double dx = i > 0 ? x(i, j) - x(i - 1, j) : 0.0;
      const double dy = j > 0 ? x(i, j) - x(i, j - 1) : 0.0;
      tv += std::sqrt(dx * dx + dy * dy);
    }
  }
  return tv;
}

Tensor2 tv_gradient(const Tensor2& x, double eps) {
  Tensor2 g(x.dims());
  for (std::size_t j = 0; j < x.dim(1); ++j) {
    for (std::size_t i = 0; i < x.dim(0); ++i) {
      const double dx = i > 0 ? x(i, j) - x(i - 1, j) : 0.0;
      const double dy = j > 0 ? x(i, j) - x(i, j - 1) : 0.0;
      const double n = std::sqrt(dx * dx + dy * dy + eps);
      g(i, j) += (dx + dy) / n;
      if (i > 0) g(i - 1, j) -= dx / n;
      if (j > 0) g(i, j - 1) -= dy / n;
    }
  }
  return g;
}

}  // namespace sct
