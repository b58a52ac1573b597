#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sct {

/// Dense real tensor of fixed order. Storage is column-major in the index
/// sense: dims[0] varies fastest and the last dimension is slowest, so a
/// SpectralImage (I1, I2, S) stores each channel as one contiguous slab.
template <std::size_t Rank>
class DenseTensor {
 public:
  using Dims = std::array<std::size_t, Rank>;

  DenseTensor() { dims_.fill(0); }

  explicit DenseTensor(const Dims& dims, double fill = 0.0) : dims_(dims) {
    check_dims();
    data_.assign(element_count(dims_), fill);
  }

  DenseTensor(const Dims& dims, std::vector<double> data) : dims_(dims), data_(std::move(data)) {
    check_dims();
    if (data_.size() != element_count(dims_)) {
      throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                  " does not match dims product " +
                                  std::to_string(element_count(dims_)));
    }
    for (double v : data_) {
      if (!std::isfinite(v)) throw std::invalid_argument("tensor data contains non-finite values");
    }
  }

  const Dims& dims() const noexcept { return dims_; }
  std::size_t dim(std::size_t n) const { return dims_.at(n); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  template <typename... Idx>
  double& operator()(Idx... idx) {
    static_assert(sizeof...(Idx) == Rank);
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... Idx>
  double operator()(Idx... idx) const {
    static_assert(sizeof...(Idx) == Rank);
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  std::size_t offset(const Dims& idx) const noexcept {
    std::size_t off = 0;
    for (std::size_t n = Rank; n-- > 0;) off = off * dims_[n] + idx[n];
    return off;
  }

  /// Contiguous view of one index of the slowest mode (a channel for Tensor3).
  std::span<double> slab(std::size_t k) {
    const std::size_t len = slab_size();
    return std::span<double>(data_).subspan(k * len, len);
  }
  std::span<const double> slab(std::size_t k) const {
    const std::size_t len = slab_size();
    return std::span<const double>(data_).subspan(k * len, len);
  }
  std::size_t slab_size() const noexcept {
    return dims_[Rank - 1] == 0 ? 0 : data_.size() / dims_[Rank - 1];
  }

  static std::size_t element_count(const Dims& d) {
    return std::accumulate(d.begin(), d.end(), std::size_t{1}, std::multiplies<>());
  }

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  void check_dims() const {
    for (std::size_t d : dims_) {
      if (d == 0) throw std::invalid_argument("tensor dims must be positive");
    }
  }

  Dims dims_{};
  std::vector<double> data_;
};

using Tensor2 = DenseTensor<2>;
using Tensor3 = DenseTensor<3>;
using Tensor4 = DenseTensor<4>;

// Free-standing arithmetic used across the reconstruction code.
double inner(std::span<const double> a, std::span<const double> b);
double frobenius_norm(std::span<const double> a);

template <std::size_t R>
double inner(const DenseTensor<R>& a, const DenseTensor<R>& b) {
  if (a.dims() != b.dims()) throw std::invalid_argument("inner: dims mismatch");
  return inner(a.data(), b.data());
}

/// Mode-n product t ×_n m, where m is J × I_n. Mode indices are zero-based.
Tensor3 mode_n_product(const Tensor3& t, const Eigen::MatrixXd& m, std::size_t mode);
Tensor4 mode_n_product(const Tensor4& t, const Eigen::MatrixXd& m, std::size_t mode);

/// 𝒟 ×₄ a for a length-K coefficient vector: Σ_k a_k 𝒟^{(k)}.
Tensor3 contract_last(const Tensor4& t, std::span<const double> coeffs);

/// Copy channel s of a (I1, I2, S) tensor into a 2-D image.
Tensor2 channel(const Tensor3& t, std::size_t s);
void set_channel(Tensor3& t, std::size_t s, const Tensor2& img);

}  // namespace sct
