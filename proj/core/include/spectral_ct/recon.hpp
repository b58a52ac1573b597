#pragma once

#include "spectral_ct/dictionary.hpp"
#include "spectral_ct/fbp.hpp"
#include "spectral_ct/patch_grid.hpp"
#include "spectral_ct/projector.hpp"
#include "spectral_ct/tensor.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace sct {

struct ReconParams {
  double eta = 1.6;             ///< dictionary weight, scaled into λ
  double sigma = 5.7;           ///< coupling weight, scaled into β
  double epsilon = 1.5e-3;      ///< MOMP precision level
  double lambda_star = 2.6e-4;  ///< gradient-ℓ0 smoothing weight (μ/β)
  std::size_t sparsity = 11;    ///< L
  std::size_t atoms = 1024;     ///< K
  std::size_t iterations = 200;
  std::size_t subsets = 10;
  std::size_t patch_size = 8;
  std::size_t patch_stride = 1;
  double tv_weight = 0.2;       ///< TV baseline step relative to the data step
  std::size_t tv_steps = 10;

  CodingConfig coding() const { return {sparsity, epsilon}; }
  void validate() const;
};

/// Named parameter sets for the simulated protocols.
struct ReconPreset {
  std::string name;
  std::size_t views;
  double photons;
  ReconParams params;
};

const std::vector<ReconPreset>& recon_presets();
/// Throws std::invalid_argument listing the known names.
const ReconPreset& find_preset(const std::string& name);

/// Weight scaling for the 64×64 desk protocol. The dictionary term dominates
/// the high frequencies that a sparse-view AᵀA barely constrains, and at the
/// desk image size an 8×8 patch spans an eighth of the field, so the preset
/// weights over-smooth. η and σ are scaled by fixed factors shared by every
/// preset, which keeps the preset-to-preset proportions; ε, λ*, and L stay as
/// listed.
inline constexpr double kDeskEtaFactor = 1.0 / 64.0;
inline constexpr double kDeskSigmaFactor = 1.0 / 5.7;
ReconParams desk_proportioned(ReconParams p);

// Sinogram sets are (detector, view, channel) tensors; spectral images are
// (i1, i2, channel).

/// Max voxel of the prior image over all channels; 1 when that is not positive.
double normalization_scale(const Tensor3& prior_fbp);

struct NormalizedSinogram {
  Tensor3 sino;
  double scale;
};

NormalizedSinogram normalize(const Tensor3& sino, const Tensor3& prior_fbp);
Tensor3 denormalize(const Tensor3& image, double scale);

/// λ = η·S·Σ_pixels Aᵀ(A·1) / Σ_{channels, pixels} coverage.
double compute_lambda(double eta, const Projector& projector, const PatchGrid& grid);
/// β with σ in place of η.
double compute_beta(double sigma, const Projector& projector, const PatchGrid& grid);

Tensor3 fbp_all_channels(const Tensor3& sino, const ScanGeometry& g, FbpFilter filter = FbpFilter::ram_lak);

struct IterationRecord {
  std::size_t iteration = 0;
  double data_fidelity = 0.0;        ///< Σ_s ‖A x_s − y_s‖², normalized units
  double dictionary_residual = 0.0;  ///< Σ_r ‖ℤ_r X − decode_r‖²
  std::size_t gradient_l0_x = 0;     ///< Σ_s ‖∇x_s‖₀
  std::size_t gradient_l0_u = 0;     ///< Σ_s ‖∇u_s‖₀
  double coupling = 0.0;             ///< β‖X − U − T‖²
  std::vector<double> rmse;          ///< per channel, physical units; empty without truth
};

struct ReconState {
  Tensor3 x;
  Tensor3 u;
  Tensor3 t;
  std::vector<SparseCode> codes;
  double lambda = 0.0;
  double beta = 0.0;
  std::vector<IterationRecord> history;
};

/// Ordered-subset separable-quadratic-surrogate image update. Each subset
/// step uses M·A_mᵀ(A_m x − y_m) and M·A_mᵀA_m·1 for M subsets, plus the
/// dictionary term λ·ℤᵀ(ℤX − decoded patches) with curvature λ·coverage and
/// the coupling term β(X − U − T) with curvature β. Voxels with a zero
/// denominator are left unchanged; the result is clamped at zero.
class SqsUpdater {
 public:
  SqsUpdater(const Projector& projector, const Tensor3& sino, std::size_t subsets, Tensor3 coverage);

  std::size_t subset_count() const noexcept { return subsets_.size(); }
  const std::vector<std::size_t>& subset_views(std::size_t m) const { return subsets_.at(m); }
  const Tensor3& coverage() const noexcept { return coverage_; }

  /// patch_sum = Σ_r ℤ_rᵀ decode_r; ignored when state.lambda is 0.
  void update(ReconState& state, std::size_t subset, const Tensor3& patch_sum) const;

  double data_fidelity(const Tensor3& x) const;

 private:
  const Projector& projector_;
  const Tensor3& sino_;
  std::vector<std::vector<std::size_t>> subsets_;
  std::vector<std::vector<double>> curvature_;
  Tensor3 coverage_;
};

/// T ← T + U − X.
void multiplier_update(ReconState& state);

struct ReconInputs {
  const Projector& projector;
  const Tensor3& sino;      ///< normalized
  Tensor3 initial;          ///< normalized starting image
  const Tensor3* truth = nullptr;  ///< physical units, for the history log
  double scale = 1.0;       ///< normalization factor
};

struct ReconResult {
  Tensor3 image;  ///< normalized units
  std::vector<IterationRecord> history;
  double lambda = 0.0;
  double beta = 0.0;
};

ReconResult os_sqs_reconstruct(const ReconInputs& in, const ReconParams& p);
ReconResult tv_reconstruct(const ReconInputs& in, const ReconParams& p);
ReconResult tdl_reconstruct(const ReconInputs& in, const TensorDictionary& dict, const ReconParams& p);
ReconResult l0tdl_reconstruct(const ReconInputs& in, const TensorDictionary& dict, const ReconParams& p);

/// Isotropic TV seminorm Σ√(∂x² + ∂y²) with backward differences.
double tv_seminorm(const Tensor2& x);
/// Gradient of the smoothed seminorm Σ√(∂x² + ∂y² + eps).
Tensor2 tv_gradient(const Tensor2& x, double eps = 1e-8);

}  // namespace sct
