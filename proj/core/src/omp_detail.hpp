#pragma once

#include "spectral_ct/dictionary.hpp"

#include <Eigen/Dense>

#include <vector>

namespace sct::detail {

/// Gram-based OMP for one signal. alpha0 = Dᵀx, x_norm2 = ‖x‖². The residual
/// norm is tracked as ‖x‖² − cᵀ(Dᵀx)_I, which holds for least-squares
/// coefficients. Reuses the scratch buffers across calls.
class GramOmp {
 public:
  GramOmp(const Eigen::MatrixXd& gram, const CodingConfig& cfg, std::size_t signal_elements);

  std::vector<CodeEntry> encode(const Eigen::Ref<const Eigen::VectorXd>& alpha0, double x_norm2);

 private:
  const Eigen::MatrixXd& gram_;
  std::size_t max_atoms_;
  double stop_norm2_;
  Eigen::VectorXd alpha_;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd rhs_;
  Eigen::VectorXd coeff_;
  std::vector<int> selected_;
  std::vector<char> used_;
};

}  // namespace sct::detail
