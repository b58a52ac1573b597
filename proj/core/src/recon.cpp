#include "spectral_ct/recon.hpp"

#include "spectral_ct/l0_gradient.hpp"
#include "spectral_ct/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sct {

void ReconParams::validate() const {
  const auto nonneg = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be finite and >= 0");
  };
  nonneg(eta, "eta");
  nonneg(sigma, "sigma");
  nonneg(epsilon, "epsilon");
  nonneg(lambda_star, "lambda_star");
  nonneg(tv_weight, "tv_weight");
  if (sparsity < 1) throw std::invalid_argument("sparsity L must be >= 1");
  if (atoms < 1) throw std::invalid_argument("atom count K must be >= 1");
  if (subsets < 1) throw std::invalid_argument("subset count must be >= 1");
  if (patch_size < 1 || patch_stride < 1) throw std::invalid_argument("patch size and stride must be >= 1");
}

const std::vector<ReconPreset>& recon_presets() {
  static const std::vector<ReconPreset> presets = [] {
    const auto make = [](const char* name, std::size_t views, double photons, double sigma, double eta, double eps,
                         double lstar, std::size_t l) {
      ReconPreset p{name, views, photons, {}};
      p.params.sigma = sigma;
      p.params.eta = eta;
      p.params.epsilon = eps;
      p.params.lambda_star = lstar;
      p.params.sparsity = l;
      return p;
    };
    return std::vector<ReconPreset>{
        make("sim-160view", 160, 5000, 4.80, 1.10, 1.10e-3, 1.80e-4, 13),
        make("sim-106view", 106, 5000, 5.30, 1.40, 1.25e-3, 2.45e-4, 12),
        make("sim-80view", 80, 5000, 5.70, 1.60, 1.50e-3, 2.60e-4, 11),
        make("sim-80view-4e3", 80, 4000, 5.80, 1.60, 1.60e-3, 2.60e-4, 11),
        make("sim-80view-3e3", 80, 3000, 6.10, 1.90, 2.10e-3, 3.10e-4, 9),
    };
  }();
  return presets;
}

const ReconPreset& find_preset(const std::string& name) {
  std::string known;
  for (const ReconPreset& p : recon_presets()) {
    if (p.name == name) return p;
    known += (known.empty() ? "" : ", ") + p.name;
  }
  throw std::invalid_argument("unknown recon preset '" + name + "' (known: " + known + ")");
}

ReconParams desk_proportioned(ReconParams p) {
  p.eta *= kDeskEtaFactor;
  p.sigma *= kDeskSigmaFactor;
  return p;
}

double normalization_scale(const Tensor3& prior_fbp) {
  double m = 0.0;
  for (double v : prior_fbp.data()) m = std::max(m, v);
  return m > 0.0 ? m : 1.0;
}

NormalizedSinogram normalize(const Tensor3& sino, const Tensor3& prior_fbp) {
  const double scale = normalization_scale(prior_fbp);
  Tensor3 out = sino;
  for (double& v : out.data()) v /= scale;
  return {std::move(out), scale};
}

Tensor3 denormalize(const Tensor3& image, double scale) {
  Tensor3 out = image;
  for (double& v : out.data()) v *= scale;
  return out;
}

namespace {

double sum_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

double regularizer_weight(double w, const Projector& projector, const PatchGrid& grid) {
  if (!(w >= 0.0)) throw std::invalid_argument("regularization weight must be >= 0");
  if (grid.image_dims()[0] != projector.geometry().image_nx || grid.image_dims()[1] != projector.geometry().image_ny) {
    throw std::invalid_argument("patch grid and scan geometry disagree on the image size");
  }
  const double cov = sum_of(coverage_map(grid).data());
  if (!(cov > 0.0)) throw std::invalid_argument("patch grid has zero coverage");
  const double s = static_cast<double>(grid.channels());
  return w * s * sum_of(projector.sqs_denominator()) / cov;
}

}  // namespace

double compute_lambda(double eta, const Projector& projector, const PatchGrid& grid) {
  return regularizer_weight(eta, projector, grid);
}

double compute_beta(double sigma, const Projector& projector, const PatchGrid& grid) {
  return regularizer_weight(sigma, projector, grid);
}

Tensor3 fbp_all_channels(const Tensor3& sino, const ScanGeometry& g, FbpFilter filter) {
  if (sino.dim(0) != g.detector_count || sino.dim(1) != g.view_count()) {
    throw std::invalid_argument("sinogram dims do not match the scan geometry");
  }
  Tensor3 out({g.image_nx, g.image_ny, sino.dim(2)});
  for (std::size_t s = 0; s < sino.dim(2); ++s) {
    const std::vector<double> img = fbp_reconstruct(sino.slab(s), g, filter);
    std::copy(img.begin(), img.end(), out.slab(s).begin());
  }
  return out;
}

SqsUpdater::SqsUpdater(const Projector& projector, const Tensor3& sino, std::size_t subsets, Tensor3 coverage)
    : projector_(projector), sino_(sino), coverage_(std::move(coverage)) {
  const ScanGeometry& g = projector.geometry();
  if (sino.dim(0) != g.detector_count || sino.dim(1) != g.view_count()) {
    throw std::invalid_argument("sinogram dims do not match the projector");
  }
  if (coverage_.dims() != Tensor3::Dims{g.image_nx, g.image_ny, sino.dim(2)}) {
    throw std::invalid_argument("coverage map dims do not match the image");
  }
  if (subsets < 1 || subsets > g.view_count()) throw std::invalid_argument("subset count must be in [1, views]");
  subsets_ = ordered_subsets(g.view_count(), subsets);
  const double m = static_cast<double>(subsets);
  for (const auto& views : subsets_) {
    std::vector<double> c = projector.sqs_denominator(views);
    for (double& v : c) v *= m;
    curvature_.push_back(std::move(c));
  }
}

void SqsUpdater::update(ReconState& state, std::size_t subset, const Tensor3& patch_sum) const {
  const auto& views = subsets_.at(subset);
  const std::vector<double>& curv = curvature_[subset];
  const std::size_t det = projector_.detector_count();
  const std::size_t npix = projector_.pixel_count();
  const double m = static_cast<double>(subsets_.size());
  const bool use_dict = state.lambda != 0.0;
  const bool use_coupling = state.beta != 0.0;
  if (use_dict && patch_sum.dims() != state.x.dims()) throw std::invalid_argument("patch sum dims differ from X");
  if (use_coupling && (state.u.dims() != state.x.dims() || state.t.dims() != state.x.dims())) {
    throw std::invalid_argument("U and T dims differ from X");
  }
  std::vector<double> resid(views.size() * det);
  for (std::size_t s = 0; s < state.x.dim(2); ++s) {
    auto x = state.x.slab(s);
    std::vector<double> ax = projector_.forward(x, views);
    const auto y = sino_.slab(s);
    for (std::size_t i = 0; i < views.size(); ++i) {
      for (std::size_t j = 0; j < det; ++j) resid[i * det + j] = ax[i * det + j] - y[views[i] * det + j];
    }
    const std::vector<double> grad = projector_.back(resid, views);
    const auto cov = coverage_.slab(s);
    const auto ps = use_dict ? patch_sum.slab(s) : std::span<const double>();
    const auto us = state.u.slab(s);
    const auto ts = state.t.slab(s);
    for (std::size_t p = 0; p < npix; ++p) {
      double num = m * grad[p];
      double den = curv[p];
      if (use_dict) {
        num += state.lambda * (cov[p] * x[p] - ps[p]);
        den += state.lambda * cov[p];
      }
      if (use_coupling) {
        num += state.beta * (x[p] - us[p] - ts[p]);
        den += state.beta;
      }
      if (den > 0.0) x[p] = std::max(0.0, x[p] - num / den);
    }
  }
}

double SqsUpdater::data_fidelity(const Tensor3& x) const {
  double f = 0.0;
  for (std::size_t s = 0; s < x.dim(2); ++s) {
    const std::vector<double> ax = projector_.forward(x.slab(s));
    const auto y = sino_.slab(s);
    for (std::size_t i = 0; i < ax.size(); ++i) {
      const double d = ax[i] - y[i];
      f += d * d;
    }
  }
  return f;
}

void multiplier_update(ReconState& state) {
  if (state.t.dims() != state.x.dims() || state.u.dims() != state.x.dims()) {
    throw std::invalid_argument("multiplier_update: X, U, T dims differ");
  }
  auto t = state.t.data();
  const auto u = state.u.data();
  const auto x = state.x.data();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = t[i] + u[i] - x[i];
}

namespace {

enum class Method { os_sqs, tv, tdl, l0tdl };

void check_inputs(const ReconInputs& in) {
  const ScanGeometry& g = in.projector.geometry();
  if (in.initial.dim(0) != g.image_nx || in.initial.dim(1) != g.image_ny || in.initial.dim(2) != in.sino.dim(2)) {
    throw std::invalid_argument("initial image dims do not match the geometry and channel count");
  }
  if (in.truth && in.truth->dims() != in.initial.dims()) {
    throw std::invalid_argument("truth image dims do not match the reconstruction");
  }
  for (double v : in.initial.data()) {
    if (!std::isfinite(v)) throw std::runtime_error("initial image contains non-finite values");
  }
}

std::vector<double> channel_rmse(const ReconInputs& in, const Tensor3& x) {
  std::vector<double> out;
  if (!in.truth) return out;
  const std::size_t len = x.slab_size();
  std::vector<double> phys(len);
  for (std::size_t s = 0; s < x.dim(2); ++s) {
    const auto xs = x.slab(s);
    for (std::size_t i = 0; i < len; ++i) phys[i] = xs[i] * in.scale;
    out.push_back(rmse(phys, in.truth->slab(s)));
  }
  return out;
}

std::size_t total_gradient_l0(const Tensor3& x) {
  std::size_t n = 0;
  for (std::size_t s = 0; s < x.dim(2); ++s) n += gradient_l0_norm(channel(x, s));
  return n;
}

void check_finite(const Tensor3& x) {
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw std::runtime_error("reconstruction diverged: non-finite voxel");
  }
}

Eigen::MatrixXd subtract_means(const Eigen::MatrixXd& cols, const Eigen::MatrixXd& means) {
  Eigen::MatrixXd out = cols;
  const Eigen::Index slice = cols.rows() / means.rows();
  for (Eigen::Index r = 0; r < cols.cols(); ++r) {
    for (Eigen::Index s = 0; s < means.rows(); ++s) out.col(r).segment(s * slice, slice).array() -= means(s, r);
  }
  return out;
}

// MOMP of every patch after removing the given per-channel means.
std::vector<SparseCode> encode_patches(const Eigen::MatrixXd& cols, const Eigen::MatrixXd& means,
                                       const TensorDictionary& dict, const CodingConfig& coding) {
  std::vector<SparseCode> codes = omp_columns(subtract_means(cols, means), dict, coding);
  for (Eigen::Index r = 0; r < cols.cols(); ++r) codes[static_cast<std::size_t>(r)].mean = means.col(r);
  return codes;
}

Eigen::MatrixXd atom_part(const std::vector<SparseCode>& codes, const TensorDictionary& dict) {
  std::vector<SparseCode> bare(codes.size());
  for (std::size_t r = 0; r < bare.size(); ++r) bare[r].entries = codes[r].entries;
  return decode_columns(bare, dict);
}

void tv_steps(Tensor3& x, const Tensor3& before, const ReconParams& p) {
  for (std::size_t s = 0; s < x.dim(2); ++s) {
    const auto xs = x.slab(s);
    const auto bs = before.slab(s);
    double dp = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) dp += (xs[i] - bs[i]) * (xs[i] - bs[i]);
    dp = std::sqrt(dp);
    if (dp == 0.0) continue;
    Tensor2 img = channel(x, s);
    for (std::size_t k = 0; k < p.tv_steps; ++k) {
      const Tensor2 g = tv_gradient(img);
      const double gn = frobenius_norm(g.data());
      if (gn == 0.0) break;
      const double step = p.tv_weight * dp / gn;
      for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] -= step * g.data()[i];
    }
    for (double& v : img.data()) v = std::max(0.0, v);
    set_channel(x, s, img);
  }
}

ReconResult run(const ReconInputs& in, const TensorDictionary* dict, const ReconParams& p, Method method) {
  p.validate();
  check_inputs(in);
  const ScanGeometry& g = in.projector.geometry();
  const Tensor3::Dims dims = in.initial.dims();
  const std::size_t channels = dims[2];
  const bool dictionary_method = method == Method::tdl || method == Method::l0tdl;
  const bool l0 = method == Method::l0tdl;

  PatchGrid grid(p.patch_size, p.patch_stride, {g.image_nx, g.image_ny, channels});
  if (dictionary_method) {
    if (!dict) throw std::invalid_argument("dictionary reconstruction needs a trained dictionary");
    if (dict->patch_size() != p.patch_size || dict->channels() != channels) {
      throw std::invalid_argument("dictionary patch size or channel count does not match the reconstruction");
    }
  }

  ReconState st;
  st.x = in.initial;
  for (double& v : st.x.data()) v = std::max(0.0, v);
  st.u = st.x;
  st.t = Tensor3(dims);
  if (dictionary_method) st.lambda = compute_lambda(p.eta, in.projector, grid);
  if (l0) st.beta = compute_beta(p.sigma, in.projector, grid);

  SqsUpdater sqs(in.projector, in.sino, p.subsets, coverage_map(grid));
  const CodingConfig coding = p.coding();
  L0Smoother smoother(g.image_nx, g.image_ny);
  L0Schedule sched = L0Schedule::for_lambda(p.lambda_star);

  Tensor3 patch_sum(dims);
  double dict_residual = 0.0;
  if (dictionary_method) {
    // Initial codes: mean removal then MOMP on the starting image.
    const Eigen::MatrixXd cols = extract_all(st.x, grid);
    st.codes = encode_patches(cols, column_channel_means(cols, channels), *dict, coding);
    const Eigen::MatrixXd decoded = decode_columns(st.codes, *dict);
    patch_sum = aggregate_columns(decoded, grid);
  }

  ReconResult result;
  result.lambda = st.lambda;
  result.beta = st.beta;
  for (std::size_t it = 0; it < p.iterations; ++it) {
    const Tensor3 before = method == Method::tv ? st.x : Tensor3();
    for (std::size_t m = 0; m < sqs.subset_count(); ++m) sqs.update(st, m, patch_sum);
    if (method == Method::tv && p.tv_weight > 0.0) tv_steps(st.x, before, p);

    if (l0) {
      for (std::size_t s = 0; s < channels; ++s) {
        Tensor2 w = channel(st.x, s);
        const auto ts = st.t.slab(s);
        for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] -= ts[i];
        set_channel(st.u, s, smoother.smooth(w, sched));
      }
      multiplier_update(st);
    }

    if (dictionary_method) {
      // Mean update for the current codes, then MOMP on the patches with
      // those means removed.
      const Eigen::MatrixXd cols = extract_all(st.x, grid);
      const Eigen::MatrixXd means = column_channel_means(cols - atom_part(st.codes, *dict), channels);
      st.codes = encode_patches(cols, means, *dict, coding);
      const Eigen::MatrixXd decoded = decode_columns(st.codes, *dict);
      dict_residual = (cols - decoded).squaredNorm();
      patch_sum = aggregate_columns(decoded, grid);
    }

    for (double& v : st.x.data()) v = std::max(0.0, v);
    check_finite(st.x);

    IterationRecord rec;
    rec.iteration = it + 1;
    rec.data_fidelity = sqs.data_fidelity(st.x);
    rec.dictionary_residual = dict_residual;
    rec.gradient_l0_x = total_gradient_l0(st.x);
    if (l0) {
      rec.gradient_l0_u = total_gradient_l0(st.u);
      double c = 0.0;
      for (std::size_t i = 0; i < st.x.size(); ++i) {
        const double d = st.x.data()[i] - st.u.data()[i] - st.t.data()[i];
        c += d * d;
      }
      rec.coupling = st.beta * c;
    }
    rec.rmse = channel_rmse(in, st.x);
    result.history.push_back(std::move(rec));
  }
  result.image = std::move(st.x);
  return result;
}

}  // namespace

ReconResult os_sqs_reconstruct(const ReconInputs& in, const ReconParams& p) {
  return run(in, nullptr, p, Method::os_sqs);
}

ReconResult tv_reconstruct(const ReconInputs& in, const ReconParams& p) { return run(in, nullptr, p, Method::tv); }

ReconResult tdl_reconstruct(const ReconInputs& in, const TensorDictionary& dict, const ReconParams& p) {
  return run(in, &dict, p, Method::tdl);
}

ReconResult l0tdl_reconstruct(const ReconInputs& in, const TensorDictionary& dict, const ReconParams& p) {
  return run(in, &dict, p, Method::l0tdl);
}

}  // namespace sct
