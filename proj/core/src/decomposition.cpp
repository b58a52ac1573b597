#include "spectral_ct/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace sct {

NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  if (a.rows() != b.size()) throw std::invalid_argument("nnls: row count does not match b");
  const Eigen::Index n = a.cols();
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * a.cwiseAbs().colwise().sum().maxCoeff() *
                     static_cast<double>(std::max(a.rows(), n));
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);

  const auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    }
    Eigen::MatrixXd ap(a.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) ap.col(static_cast<Eigen::Index>(k)) = a.col(idx[k]);
    const Eigen::VectorXd zp = ap.colPivHouseholderQr().solve(b);
    z.setZero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) z[idx[k]] = zp[static_cast<Eigen::Index>(k)];
  };

  Eigen::VectorXd w = a.transpose() * (b - a * x);
  const int max_outer = static_cast<int>(3 * n + 10);
  for (int outer = 0; outer < max_outer; ++outer) {
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w[j] > best_w) {
        best_w = w[j];
        best = j;
      }
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;

    Eigen::VectorXd z;
    for (int inner = 0; inner < static_cast<int>(3 * n + 10); ++inner) {
      solve_passive(z);
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) feasible = false;
      }
      if (feasible) break;
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) alpha = std::min(alpha, x[j] / (x[j] - z[j]));
      }
      x += alpha * (z - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x[j] <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          x[j] = 0.0;
        }
      }
    }
    x = z;
    w = a.transpose() * (b - a * x);
  }
  for (Eigen::Index j = 0; j < n; ++j) x[j] = std::max(0.0, x[j]);
  return {x, (a * x - b).norm()};
}

DecompositionResult decompose_materials(const Tensor3& image, const MaterialBasis& basis) {
  basis.validate();
  const std::size_t s_count = basis.channels();
  const std::size_t m_count = basis.materials();
  if (image.dim(2) != s_count) {
    throw std::invalid_argument("image has " + std::to_string(image.dim(2)) + " channels but the basis has " +
                                std::to_string(s_count));
  }
  if (s_count < m_count) throw std::invalid_argument("decomposition needs at least as many channels as materials");
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(basis.mu);
  const Eigen::VectorXd sv = svd.singularValues();
  const double cond = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : std::numeric_limits<double>::infinity();
  if (!(cond < 1e12)) {
    std::ostringstream msg;
    msg << "material basis is rank deficient (condition number " << cond << ")";
    throw std::invalid_argument(msg.str());
  }

  const std::size_t nx = image.dim(0);
  const std::size_t ny = image.dim(1);
  DecompositionResult out{basis.names, Tensor3({nx, ny, m_count}), Tensor2({nx, ny})};
  Eigen::VectorXd pixel(static_cast<Eigen::Index>(s_count));
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      for (std::size_t s = 0; s < s_count; ++s) pixel[static_cast<Eigen::Index>(s)] = image(i, j, s);
      const NnlsResult r = nnls(basis.mu, pixel);
      for (std::size_t m = 0; m < m_count; ++m) out.fractions(i, j, m) = r.x[static_cast<Eigen::Index>(m)];
      out.residual(i, j) = r.residual_norm;
    }
  }
  return out;
}

Tensor3 color_fuse(const DecompositionResult& d) {
  if (d.fractions.dim(2) != 3) throw std::invalid_argument("color fusion needs exactly three materials");
  Tensor3 rgb = d.fractions;
  for (std::size_t c = 0; c < 3; ++c) {
    auto ch = rgb.slab(c);
    const double mx = *std::max_element(ch.begin(), ch.end());
    if (mx > 0.0) {
      for (double& v : ch) v /= mx;
    } else {
      std::fill(ch.begin(), ch.end(), 0.0);
    }
  }
  return rgb;
}

}  // namespace sct
