#pragma once

#include "spectral_ct/simulator.hpp"
#include "spectral_ct/tensor.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace sct {

struct NnlsResult {
  Eigen::VectorXd x;
  double residual_norm = 0.0;
};

/// Lawson–Hanson active-set solution of min ‖Ax − b‖ subject to x ≥ 0.
NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

struct DecompositionResult {
  std::vector<std::string> materials;
  Tensor3 fractions;  ///< nx × ny × M, nonnegative
  Tensor2 residual;   ///< per-pixel ‖μ·f − x‖
};

/// Per-pixel NNLS fit of the channel vector onto the basis attenuation
/// columns. A basis with fewer channels than materials, or whose columns are
/// numerically dependent, is rejected with its condition number.
DecompositionResult decompose_materials(const Tensor3& image, const MaterialBasis& basis);

/// Three fraction maps as RGB in [0, 1], each divided by its own maximum.
Tensor3 color_fuse(const DecompositionResult& d);

}  // namespace sct
