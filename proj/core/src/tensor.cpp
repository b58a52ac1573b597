#include "spectral_ct/tensor.hpp"

#include <cmath>

namespace sct {

double inner(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("inner: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double frobenius_norm(std::span<const double> a) { return std::sqrt(inner(a, a)); }

namespace {

template <std::size_t R>
DenseTensor<R> mode_product_impl(const DenseTensor<R>& t, const Eigen::MatrixXd& m, std::size_t mode) {
  if (mode >= R) {
    throw std::invalid_argument("mode_n_product: mode " + std::to_string(mode) + " out of range for order " +
                                std::to_string(R));
  }
  const auto& dims = t.dims();
  if (static_cast<std::size_t>(m.cols()) != dims[mode]) {
    throw std::invalid_argument("mode_n_product: matrix has " + std::to_string(m.cols()) +
                                " columns but tensor mode " + std::to_string(mode) + " has size " +
                                std::to_string(dims[mode]));
  }
  std::size_t inner_block = 1;
  for (std::size_t n = 0; n < mode; ++n) inner_block *= dims[n];
  std::size_t outer_block = 1;
  for (std::size_t n = mode + 1; n < R; ++n) outer_block *= dims[n];

  auto out_dims = dims;
  out_dims[mode] = static_cast<std::size_t>(m.rows());
  DenseTensor<R> out(out_dims);

  const std::size_t in_mid = dims[mode];
  const std::size_t out_mid = out_dims[mode];
  const auto src = t.data();
  auto dst = out.data();
  for (std::size_t a = 0; a < outer_block; ++a) {
    for (std::size_t j = 0; j < out_mid; ++j) {
      double* out_col = dst.data() + (a * out_mid + j) * inner_block;
      for (std::size_t i = 0; i < in_mid; ++i) {
        const double w = m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
        const double* in_col = src.data() + (a * in_mid + i) * inner_block;
        for (std::size_t b = 0; b < inner_block; ++b) out_col[b] += w * in_col[b];
      }
    }
  }
  return out;
}

}  // namespace

Tensor3 mode_n_product(const Tensor3& t, const Eigen::MatrixXd& m, std::size_t mode) {
  return mode_product_impl(t, m, mode);
}

Tensor4 mode_n_product(const Tensor4& t, const Eigen::MatrixXd& m, std::size_t mode) {
  return mode_product_impl(t, m, mode);
}

Tensor3 contract_last(const Tensor4& t, std::span<const double> coeffs) {
  const auto& d = t.dims();
  if (coeffs.size() != d[3]) {
    throw std::invalid_argument("contract_last: " + std::to_string(coeffs.size()) + " coefficients for " +
                                std::to_string(d[3]) + " atoms");
  }
  Tensor3 out({d[0], d[1], d[2]});
  auto dst = out.data();
  for (std::size_t k = 0; k < d[3]; ++k) {
    if (coeffs[k] == 0.0) continue;
    const auto atom = t.slab(k);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += coeffs[k] * atom[i];
  }
  return out;
}

Tensor2 channel(const Tensor3& t, std::size_t s) {
  if (s >= t.dim(2)) throw std::out_of_range("channel index out of range");
  const auto src = t.slab(s);
  return Tensor2({t.dim(0), t.dim(1)}, std::vector<double>(src.begin(), src.end()));
}

void set_channel(Tensor3& t, std::size_t s, const Tensor2& img) {
  if (s >= t.dim(2)) throw std::out_of_range("channel index out of range");
  if (img.dim(0) != t.dim(0) || img.dim(1) != t.dim(1)) throw std::invalid_argument("set_channel: dims mismatch");
  auto dst = t.slab(s);
  std::copy(img.data().begin(), img.data().end(), dst.begin());
}

}  // namespace sct
