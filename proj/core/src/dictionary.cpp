#include "spectral_ct/dictionary.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace sct {

namespace {

void normalize_factor(Eigen::VectorXd& f, std::size_t k, const char* name) {
  const double n = f.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw std::invalid_argument("atom " + std::to_string(k) + " has a zero or non-finite " + name + " factor");
  }
  f /= n;
}

}  // namespace

Eigen::VectorXd outer3(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const Eigen::VectorXd& w) {
  const Eigen::Index n1 = u.size();
  const Eigen::Index n2 = v.size();
  Eigen::VectorXd out(n1 * n2 * w.size());
  for (Eigen::Index s = 0; s < w.size(); ++s) {
    for (Eigen::Index b = 0; b < n2; ++b) {
      out.segment((s * n2 + b) * n1, n1) = u * (v[b] * w[s]);
    }
  }
  return out;
}

TensorDictionary::TensorDictionary(std::size_t patch_size, std::size_t channels, std::vector<CpFactors> factors)
    : patch_size_(patch_size), channels_(channels), factors_(std::move(factors)) {
  if (patch_size_ == 0 || channels_ == 0) throw std::invalid_argument("dictionary patch size and channels must be positive");
  if (factors_.empty()) throw std::invalid_argument("dictionary needs at least one atom (K >= 1)");
  const auto n = static_cast<Eigen::Index>(patch_size_);
  const auto s = static_cast<Eigen::Index>(channels_);
  matrix_.resize(static_cast<Eigen::Index>(atom_elements()), static_cast<Eigen::Index>(factors_.size()));
  for (std::size_t k = 0; k < factors_.size(); ++k) {
    CpFactors& f = factors_[k];
    if (f.u.size() != n || f.v.size() != n || f.w.size() != s) {
      throw std::invalid_argument("atom " + std::to_string(k) + " factor lengths do not match " +
                                  std::to_string(patch_size_) + "x" + std::to_string(patch_size_) + "x" +
                                  std::to_string(channels_));
    }
    normalize_factor(f.u, k, "u");
    normalize_factor(f.v, k, "v");
    normalize_factor(f.w, k, "w");
    matrix_.col(static_cast<Eigen::Index>(k)) = outer3(f.u, f.v, f.w);
  }
  gram_.noalias() = matrix_.transpose() * matrix_;
}

TensorDictionary TensorDictionary::random(std::size_t patch_size, std::size_t channels, std::size_t atoms,
                                          std::uint64_t seed) {
  if (atoms == 0) throw std::invalid_argument("dictionary needs at least one atom (K >= 1)");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(patch_size);
  const auto s = static_cast<Eigen::Index>(channels);
  std::vector<CpFactors> factors(atoms);
  for (CpFactors& f : factors) {
    f.u.resize(n);
    f.v.resize(n);
    f.w.resize(s);
    for (Eigen::Index i = 0; i < n; ++i) f.u[i] = normal(rng);
    for (Eigen::Index i = 0; i < n; ++i) f.v[i] = normal(rng);
    for (Eigen::Index i = 0; i < s; ++i) f.w[i] = normal(rng);
  }
  return TensorDictionary(patch_size, channels, std::move(factors));
}

Tensor3 TensorDictionary::atom(std::size_t k) const {
  if (k >= atom_count()) throw std::out_of_range("atom index " + std::to_string(k) + " out of range");
  const auto col = matrix_.col(static_cast<Eigen::Index>(k));
  return Tensor3({patch_size_, patch_size_, channels_}, std::vector<double>(col.data(), col.data() + col.size()));
}

Tensor4 TensorDictionary::atoms() const {
  return Tensor4({patch_size_, patch_size_, channels_, atom_count()},
                 std::vector<double>(matrix_.data(), matrix_.data() + matrix_.size()));
}

Tensor4 mean_operator(std::size_t patch_size, std::size_t channels) {
  Tensor4 op({patch_size, patch_size, channels, channels});
  for (std::size_t s = 0; s < channels; ++s) {
    for (std::size_t b = 0; b < patch_size; ++b) {
      for (std::size_t a = 0; a < patch_size; ++a) op(a, b, s, s) = 1.0;
    }
  }
  return op;
}

CenteredPatch remove_mean(const Tensor3& patch) {
  CenteredPatch out{patch, Eigen::VectorXd(static_cast<Eigen::Index>(patch.dim(2)))};
  for (std::size_t s = 0; s < patch.dim(2); ++s) {
    auto slice = out.centered.slab(s);
    double sum = 0.0;
    for (double v : slice) sum += v;
    const double m = sum / static_cast<double>(slice.size());
    for (double& v : slice) v -= m;
    out.mean[static_cast<Eigen::Index>(s)] = m;
  }
  return out;
}

namespace {

void check_code(const SparseCode& code, const TensorDictionary& dict) {
  for (const CodeEntry& e : code.entries) {
    if (e.atom >= dict.atom_count()) {
      throw std::out_of_range("code references atom " + std::to_string(e.atom) + " of " +
                              std::to_string(dict.atom_count()));
    }
  }
  if (code.mean.size() != 0 && static_cast<std::size_t>(code.mean.size()) != dict.channels()) {
    throw std::invalid_argument("code mean length does not match the channel count");
  }
}

void add_atoms(const SparseCode& code, const TensorDictionary& dict, Eigen::Ref<Eigen::VectorXd> out) {
  for (const CodeEntry& e : code.entries) out.noalias() += e.coeff * dict.matrix().col(e.atom);
}

void add_mean(const Eigen::VectorXd& mean, std::size_t slice_len, Eigen::Ref<Eigen::VectorXd> out) {
  for (Eigen::Index s = 0; s < mean.size(); ++s) {
    out.segment(s * static_cast<Eigen::Index>(slice_len), static_cast<Eigen::Index>(slice_len)).array() += mean[s];
  }
}

}  // namespace

Tensor3 decode(const SparseCode& code, const TensorDictionary& dict) {
  check_code(code, dict);
  const std::size_t n = dict.patch_size();
  Tensor3 out({n, n, dict.channels()});
  Eigen::Map<Eigen::VectorXd> v(out.data().data(), static_cast<Eigen::Index>(out.size()));
  add_atoms(code, dict, v);
  add_mean(code.mean, n * n, v);
  return out;
}

Eigen::VectorXd update_mean(const Tensor3& patch, const SparseCode& code, const TensorDictionary& dict) {
  const std::size_t n = dict.patch_size();
  if (patch.dims() != Tensor3::Dims{n, n, dict.channels()}) {
    throw std::invalid_argument("update_mean: patch dims do not match the dictionary");
  }
  check_code(code, dict);
  Eigen::VectorXd approx = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(patch.size()));
  add_atoms(code, dict, approx);
  Eigen::Map<const Eigen::VectorXd> p(patch.data().data(), approx.size());
  const Eigen::VectorXd diff = p - approx;
  return column_channel_means(diff, dict.channels()).col(0);
}

Eigen::MatrixXd column_channel_means(const Eigen::MatrixXd& columns, std::size_t channels) {
  if (channels == 0 || columns.rows() % static_cast<Eigen::Index>(channels) != 0) {
    throw std::invalid_argument("column length is not a multiple of the channel count");
  }
  const Eigen::Index len = columns.rows() / static_cast<Eigen::Index>(channels);
  Eigen::MatrixXd means(static_cast<Eigen::Index>(channels), columns.cols());
  for (Eigen::Index r = 0; r < columns.cols(); ++r) {
    for (Eigen::Index s = 0; s < means.rows(); ++s) {
      means(s, r) = columns.col(r).segment(s * len, len).sum() / static_cast<double>(len);
    }
  }
  return means;
}

Eigen::MatrixXd decode_columns(std::span<const SparseCode> codes, const TensorDictionary& dict) {
  const std::size_t n = dict.patch_size();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dict.atom_elements()),
                                              static_cast<Eigen::Index>(codes.size()));
  for (std::size_t r = 0; r < codes.size(); ++r) {
    check_code(codes[r], dict);
    auto col = out.col(static_cast<Eigen::Index>(r));
    add_atoms(codes[r], dict, col);
    add_mean(codes[r].mean, n * n, col);
  }
  return out;
}

}  // namespace sct
