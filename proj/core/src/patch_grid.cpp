#include "spectral_ct/patch_grid.hpp"

#include <stdexcept>
#include <string>

namespace sct {

namespace {

std::vector<std::size_t> axis_positions(std::size_t extent, std::size_t patch, std::size_t stride) {
  std::vector<std::size_t> out;
  const std::size_t last = extent - patch;
  for (std::size_t p = 0; p <= last; p += stride) out.push_back(p);
  if (out.back() != last) out.push_back(last);
  return out;
}

void check_image(const Tensor3& x, const PatchGrid& grid) {
  if (x.dims() != grid.image_dims()) {
    throw std::invalid_argument("image dims do not match patch grid");
  }
}

}  // namespace

PatchGrid::PatchGrid(std::size_t patch_size, std::size_t stride, std::array<std::size_t, 3> image_dims)
    : patch_size_(patch_size), stride_(stride), image_dims_(image_dims) {
  if (patch_size == 0 || stride == 0) throw std::invalid_argument("patch size and stride must be positive");
  if (image_dims[2] == 0) throw std::invalid_argument("patch grid needs at least one channel");
  if (patch_size > image_dims[0] || patch_size > image_dims[1]) {
    throw std::invalid_argument("patch size " + std::to_string(patch_size) + " exceeds image " +
                                std::to_string(image_dims[0]) + "x" + std::to_string(image_dims[1]));
  }
  const auto p1 = axis_positions(image_dims[0], patch_size, stride);
  const auto p2 = axis_positions(image_dims[1], patch_size, stride);
  positions_.reserve(p1.size() * p2.size());
  for (std::size_t b : p2) {
    for (std::size_t a : p1) positions_.push_back({a, b});
  }
}

const PatchPosition& PatchGrid::at(std::size_t r) const {
  if (r >= positions_.size()) {
    throw std::out_of_range("patch index " + std::to_string(r) + " outside grid of " +
                            std::to_string(positions_.size()));
  }
  return positions_[r];
}

Tensor3 extract_patch(const Tensor3& x, const PatchGrid& grid, std::size_t r) {
  check_image(x, grid);
  const auto pos = grid.at(r);
  const std::size_t n = grid.patch_size();
  Tensor3 out({n, n, grid.channels()});
  for (std::size_t s = 0; s < grid.channels(); ++s) {
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t a = 0; a < n; ++a) out(a, b, s) = x(pos.i1 + a, pos.i2 + b, s);
    }
  }
  return out;
}

Tensor3 aggregate_patches(std::span<const Tensor3> patches, const PatchGrid& grid) {
  if (patches.size() != grid.size()) {
    throw std::invalid_argument("aggregate_patches: " + std::to_string(patches.size()) + " patches for grid of " +
                                std::to_string(grid.size()));
  }
  const std::size_t n = grid.patch_size();
  const std::array<std::size_t, 3> pdims{n, n, grid.channels()};
  Tensor3 out(grid.image_dims());
  for (std::size_t r = 0; r < patches.size(); ++r) {
    if (patches[r].dims() != pdims) throw std::invalid_argument("aggregate_patches: patch dims mismatch");
    const auto pos = grid.positions()[r];
    for (std::size_t s = 0; s < grid.channels(); ++s) {
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t a = 0; a < n; ++a) out(pos.i1 + a, pos.i2 + b, s) += patches[r](a, b, s);
      }
    }
  }
  return out;
}

Tensor3 coverage_map(const PatchGrid& grid) {
  const auto& d = grid.image_dims();
  Tensor2 counts({d[0], d[1]});
  const std::size_t n = grid.patch_size();
  for (const auto& pos : grid.positions()) {
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t a = 0; a < n; ++a) counts(pos.i1 + a, pos.i2 + b) += 1.0;
    }
  }
  Tensor3 out(d);
  for (std::size_t s = 0; s < d[2]; ++s) set_channel(out, s, counts);
  return out;
}

Eigen::MatrixXd extract_all(const Tensor3& x, const PatchGrid& grid) {
  check_image(x, grid);
  const std::size_t n = grid.patch_size();
  Eigen::MatrixXd cols(static_cast<Eigen::Index>(grid.patch_elements()), static_cast<Eigen::Index>(grid.size()));
  for (std::size_t r = 0; r < grid.size(); ++r) {
    const auto pos = grid.positions()[r];
    double* dst = cols.col(static_cast<Eigen::Index>(r)).data();
    std::size_t k = 0;
    for (std::size_t s = 0; s < grid.channels(); ++s) {
      for (std::size_t b = 0; b < n; ++b) {
        const double* row = &x.data()[x.offset({pos.i1, pos.i2 + b, s})];
        for (std::size_t a = 0; a < n; ++a) dst[k++] = row[a];
      }
    }
  }
  return cols;
}

Tensor3 aggregate_columns(const Eigen::MatrixXd& columns, const PatchGrid& grid) {
  if (static_cast<std::size_t>(columns.cols()) != grid.size() ||
      static_cast<std::size_t>(columns.rows()) != grid.patch_elements()) {
    throw std::invalid_argument("aggregate_columns: column matrix does not match grid");
  }
  const std::size_t n = grid.patch_size();
  Tensor3 out(grid.image_dims());
  for (std::size_t r = 0; r < grid.size(); ++r) {
    const auto pos = grid.positions()[r];
    const double* src = columns.col(static_cast<Eigen::Index>(r)).data();
    std::size_t k = 0;
    for (std::size_t s = 0; s < grid.channels(); ++s) {
      for (std::size_t b = 0; b < n; ++b) {
        double* row = &out.data()[out.offset({pos.i1, pos.i2 + b, s})];
        for (std::size_t a = 0; a < n; ++a) row[a] += src[k++];
      }
    }
  }
  return out;
}

}  // namespace sct
