#include "omp_detail.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sct {

void CodingConfig::validate() const {
  if (max_atoms < 1) throw std::invalid_argument("sparsity level L must be at least 1");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("precision level epsilon must be finite and nonnegative");
  }
}

namespace detail {

// Correlations below this fraction of ‖x‖ are treated as round-off; once the
// residual is numerically orthogonal to every atom, another atom cannot help.
constexpr double kCorrelationFloor = 1e-10;

GramOmp::GramOmp(const Eigen::MatrixXd& gram, const CodingConfig& cfg, std::size_t signal_elements)
    : gram_(gram),
      max_atoms_(std::min<std::size_t>(cfg.max_atoms, static_cast<std::size_t>(gram.rows()))),
      stop_norm2_(cfg.epsilon * cfg.epsilon * static_cast<double>(signal_elements)),
      alpha_(gram.rows()),
      chol_(Eigen::MatrixXd::Zero(max_atoms_, max_atoms_)),
      rhs_(max_atoms_),
      coeff_(max_atoms_),
      used_(gram.rows(), 0) {
  cfg.validate();
  selected_.reserve(max_atoms_);
}

std::vector<CodeEntry> GramOmp::encode(const Eigen::Ref<const Eigen::VectorXd>& alpha0, double x_norm2) {
  selected_.clear();
  std::vector<CodeEntry> out;
  const double min_corr = kCorrelationFloor * std::sqrt(x_norm2);
  double r_norm2 = x_norm2;
  alpha_ = alpha0;

  while (selected_.size() < max_atoms_ && r_norm2 > stop_norm2_) {
    int best = -1;
    double best_abs = min_corr;
    for (Eigen::Index k = 0; k < alpha_.size(); ++k) {
      const double a = std::abs(alpha_[k]);
      if (a > best_abs && !used_[k]) {
        best_abs = a;
        best = static_cast<int>(k);
      }
    }
    if (best < 0) break;

    // Extend the Cholesky factor of G_II by one row.
    const Eigen::Index n = static_cast<Eigen::Index>(selected_.size());
    if (n > 0) {
      Eigen::VectorXd g(n);
      for (Eigen::Index i = 0; i < n; ++i) g[i] = gram_(selected_[i], best);
      chol_.topLeftCorner(n, n).triangularView<Eigen::Lower>().solveInPlace(g);
      const double d2 = gram_(best, best) - g.squaredNorm();
      if (d2 <= 1e-12) break;  // numerically dependent on the selected atoms
      chol_.row(n).head(n) = g.transpose();
      chol_(n, n) = std::sqrt(d2);
    } else {
      chol_(0, 0) = std::sqrt(gram_(best, best));
    }
    selected_.push_back(best);
    used_[best] = 1;
    const Eigen::Index m = n + 1;

    for (Eigen::Index i = 0; i < m; ++i) rhs_[i] = alpha0[selected_[i]];
    auto c = coeff_.head(m);
    c = rhs_.head(m);
    chol_.topLeftCorner(m, m).triangularView<Eigen::Lower>().solveInPlace(c);
    chol_.topLeftCorner(m, m).triangularView<Eigen::Lower>().transpose().solveInPlace(c);

    alpha_ = alpha0;
    for (Eigen::Index i = 0; i < m; ++i) alpha_.noalias() -= c[i] * gram_.col(selected_[i]);
    r_norm2 = std::max(0.0, x_norm2 - c.dot(rhs_.head(m)));
  }

  out.reserve(selected_.size());
  for (std::size_t i = 0; i < selected_.size(); ++i) {
    out.push_back({static_cast<std::uint32_t>(selected_[i]), coeff_[static_cast<Eigen::Index>(i)]});
    used_[selected_[i]] = 0;
  }
  return out;
}

}  // namespace detail

SparseCode momp_encode(const Tensor3& patch, const TensorDictionary& dict, const CodingConfig& cfg) {
  const std::size_t n = dict.patch_size();
  if (patch.dims() != Tensor3::Dims{n, n, dict.channels()}) {
    throw std::invalid_argument("momp_encode: patch dims do not match the dictionary");
  }
  CenteredPatch cp = remove_mean(patch);
  Eigen::Map<const Eigen::VectorXd> x(cp.centered.data().data(), static_cast<Eigen::Index>(cp.centered.size()));
  const Eigen::VectorXd alpha0 = dict.matrix().transpose() * x;
  detail::GramOmp omp(dict.gram(), cfg, dict.atom_elements());
  SparseCode code;
  code.entries = omp.encode(alpha0, x.squaredNorm());
  code.mean = std::move(cp.mean);
  return code;
}

std::vector<SparseCode> omp_columns(const Eigen::MatrixXd& signals, const TensorDictionary& dict,
                                    const CodingConfig& cfg) {
  if (static_cast<std::size_t>(signals.rows()) != dict.atom_elements()) {
    throw std::invalid_argument("omp_columns: signal length does not match the dictionary");
  }
  detail::GramOmp omp(dict.gram(), cfg, dict.atom_elements());
  std::vector<SparseCode> codes(static_cast<std::size_t>(signals.cols()));
  // Correlations are formed in blocks to bound memory for large patch sets.
  constexpr Eigen::Index kBlock = 1024;
  Eigen::MatrixXd alpha0;
  for (Eigen::Index start = 0; start < signals.cols(); start += kBlock) {
    const Eigen::Index cols = std::min(kBlock, signals.cols() - start);
    alpha0.noalias() = dict.matrix().transpose() * signals.middleCols(start, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      codes[static_cast<std::size_t>(start + j)].entries =
          omp.encode(alpha0.col(j), signals.col(start + j).squaredNorm());
    }
  }
  return codes;
}

}  // namespace sct
