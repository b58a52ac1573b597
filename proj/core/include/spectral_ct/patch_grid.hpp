#pragma once

#include "spectral_ct/tensor.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace sct {

struct PatchPosition {
  std::size_t i1 = 0;
  std::size_t i2 = 0;
  friend bool operator==(const PatchPosition&, const PatchPosition&) = default;
};

/// Positions of N×N×S blocks inside an (I1, I2, S) image. Patches never wrap
/// and are never padded. Along each axis the positions are 0, stride, 2·stride,
/// ... and the last in-bounds position I−N is always included so every voxel
/// is covered. Order is row-major over (i2, i1) with i1 fastest.
class PatchGrid {
 public:
  PatchGrid(std::size_t patch_size, std::size_t stride, std::array<std::size_t, 3> image_dims);

  std::size_t patch_size() const noexcept { return patch_size_; }
  std::size_t stride() const noexcept { return stride_; }
  const std::array<std::size_t, 3>& image_dims() const noexcept { return image_dims_; }
  std::size_t channels() const noexcept { return image_dims_[2]; }
  std::size_t patch_elements() const noexcept { return patch_size_ * patch_size_ * image_dims_[2]; }

  const std::vector<PatchPosition>& positions() const noexcept { return positions_; }
  std::size_t size() const noexcept { return positions_.size(); }
  const PatchPosition& at(std::size_t r) const;

 private:
  std::size_t patch_size_;
  std::size_t stride_;
  std::array<std::size_t, 3> image_dims_;
  std::vector<PatchPosition> positions_;
};

/// ℤ_r: the N×N window at position r across all channels.
Tensor3 extract_patch(const Tensor3& x, const PatchGrid& grid, std::size_t r);

/// Σ_r ℤ_rᵀ p_r. The adjoint of extraction over the whole grid.
Tensor3 aggregate_patches(std::span<const Tensor3> patches, const PatchGrid& grid);

/// Per-voxel count of covering patches, Σ_r ℤ_rᵀ ℤ_r applied to ones.
Tensor3 coverage_map(const PatchGrid& grid);

/// Batched forms: patches as columns (N·N·S) × R, vectorized in Tensor3 order.
Eigen::MatrixXd extract_all(const Tensor3& x, const PatchGrid& grid);
Tensor3 aggregate_columns(const Eigen::MatrixXd& columns, const PatchGrid& grid);

}  // namespace sct
