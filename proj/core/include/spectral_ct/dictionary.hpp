#pragma once

#include "spectral_ct/tensor.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sct {

/// Rank-1 factors of one atom: atom(a, b, s) = u[a]·v[b]·w[s].
struct CpFactors {
  Eigen::VectorXd u;
  Eigen::VectorXd v;
  Eigen::VectorXd w;
};

/// N×N×S×K dictionary of rank-1 atoms with unit Frobenius norm. The factors
/// are normalized on construction (‖u‖ = ‖v‖ = ‖w‖ = 1). Atoms are also kept
/// vectorized as the columns of an (N·N·S) × K matrix, in Tensor3 order,
/// together with their Gram matrix.
class TensorDictionary {
 public:
  TensorDictionary(std::size_t patch_size, std::size_t channels, std::vector<CpFactors> factors);

  /// Gaussian factors from a seeded generator.
  static TensorDictionary random(std::size_t patch_size, std::size_t channels, std::size_t atoms, std::uint64_t seed);

  std::size_t patch_size() const noexcept { return patch_size_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t atom_count() const noexcept { return factors_.size(); }
  std::size_t atom_elements() const noexcept { return patch_size_ * patch_size_ * channels_; }

  const CpFactors& factors(std::size_t k) const { return factors_.at(k); }
  const std::vector<CpFactors>& all_factors() const noexcept { return factors_; }
  const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }
  const Eigen::MatrixXd& gram() const noexcept { return gram_; }

  Tensor3 atom(std::size_t k) const;
  Tensor4 atoms() const;

 private:
  std::size_t patch_size_;
  std::size_t channels_;
  std::vector<CpFactors> factors_;
  Eigen::MatrixXd matrix_;
  Eigen::MatrixXd gram_;
};

/// Vectorized outer product u∘v∘w in Tensor3 order.
Eigen::VectorXd outer3(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const Eigen::VectorXd& w);

/// 𝒟_m ∈ ℜ^{N×N×S×S}: slab s is one on channel s and zero elsewhere, so
/// 𝒟_m ×₄ m is the tensor that is constant m[s] on each channel.
Tensor4 mean_operator(std::size_t patch_size, std::size_t channels);

struct CodingConfig {
  std::size_t max_atoms = 11;  ///< L
  double epsilon = 1.5e-3;     ///< per-element RMS residual target

  void validate() const;
};

struct CodeEntry {
  std::uint32_t atom;
  double coeff;
};

struct SparseCode {
  std::vector<CodeEntry> entries;
  Eigen::VectorXd mean;  ///< length S
};

struct CenteredPatch {
  Tensor3 centered;
  Eigen::VectorXd mean;
};

CenteredPatch remove_mean(const Tensor3& patch);

/// Greedy OMP over the atoms on the mean-removed patch. Each step adds the
/// atom most correlated with the residual and re-fits every selected
/// coefficient by least squares; it stops at L atoms or once the RMS residual
/// reaches ε.
SparseCode momp_encode(const Tensor3& patch, const TensorDictionary& dict, const CodingConfig& cfg);

/// Σ_k a_k·atom_k plus the per-channel means.
Tensor3 decode(const SparseCode& code, const TensorDictionary& dict);

/// Closed-form per-channel mean minimizing ‖patch − 𝒟_m×₄m − 𝒟×₄a‖ for the
/// current coefficients.
Eigen::VectorXd update_mean(const Tensor3& patch, const SparseCode& code, const TensorDictionary& dict);

// Batched forms over patch columns ((N·N·S) × R), used by training and
// reconstruction.

/// OMP of every column as given (no mean handling); returned codes have an
/// empty mean.
std::vector<SparseCode> omp_columns(const Eigen::MatrixXd& signals, const TensorDictionary& dict,
                                    const CodingConfig& cfg);

/// Per-channel spatial means of each column (S × R).
Eigen::MatrixXd column_channel_means(const Eigen::MatrixXd& columns, std::size_t channels);

/// Σ_k a_k·atom_k (+ means when present) for every code, as columns.
Eigen::MatrixXd decode_columns(std::span<const SparseCode> codes, const TensorDictionary& dict);

struct KcpdOptions {
  std::size_t atoms = 1024;
  std::size_t iterations = 50;
  std::uint64_t seed = 1;
  std::size_t als_sweeps = 4;
  CodingConfig coding;
};

struct KcpdTrace {
  /// Σ‖patch − decode‖²_F after each iteration, preceded by the value for
  /// empty codes.
  std::vector<double> objective;
  std::vector<std::size_t> reseeded_atoms;
};

/// K-CPD training: alternate OMP coding of the mean-removed patches with
/// atom-by-atom rank-1 (CP) updates of the residual each atom explains.
/// A patch keeps its previous code when the new one does not fit better, and
/// each atom update is a block-coordinate descent started from the current
/// atom, so the objective never increases. Atoms no patch uses are re-seeded
/// from the worst-represented patches.
TensorDictionary kcpd_train(std::span<const Tensor3> patches, const KcpdOptions& opts, KcpdTrace* trace = nullptr);

}  // namespace sct
