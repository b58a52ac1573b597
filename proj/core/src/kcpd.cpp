#include "omp_detail.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

namespace sct {

namespace {

// Views of a vectorized N×N×S tensor as S consecutive N×N blocks.
struct Rank1Contractions {
  Eigen::Index n;
  Eigen::Index s;

  Eigen::Map<const Eigen::MatrixXd> block(const Eigen::VectorXd& m, Eigen::Index k) const {
    return Eigen::Map<const Eigen::MatrixXd>(m.data() + k * n * n, n, n);
  }
  Eigen::VectorXd along_u(const Eigen::VectorXd& m, const Eigen::VectorXd& v, const Eigen::VectorXd& w) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (Eigen::Index k = 0; k < s; ++k) out.noalias() += w[k] * (block(m, k) * v);
    return out;
  }
  Eigen::VectorXd along_v(const Eigen::VectorXd& m, const Eigen::VectorXd& u, const Eigen::VectorXd& w) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (Eigen::Index k = 0; k < s; ++k) out.noalias() += w[k] * (block(m, k).transpose() * u);
    return out;
  }
  Eigen::VectorXd along_w(const Eigen::VectorXd& m, const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
    Eigen::VectorXd out(s);
    for (Eigen::Index k = 0; k < s; ++k) out[k] = u.dot(block(m, k) * v);
    return out;
  }
};

CpFactors random_factors(Eigen::Index n, Eigen::Index s, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  CpFactors f{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(s)};
  for (Eigen::Index i = 0; i < n; ++i) f.u[i] = normal(rng);
  for (Eigen::Index i = 0; i < n; ++i) f.v[i] = normal(rng);
  for (Eigen::Index i = 0; i < s; ++i) f.w[i] = normal(rng);
  f.u.normalize();
  f.v.normalize();
  f.w.normalize();
  return f;
}

bool normalize_in_place(CpFactors& f, double& scale) {
  const double nu = f.u.norm();
  const double nv = f.v.norm();
  const double nw = f.w.norm();
  if (!(nu > 0.0 && nv > 0.0 && nw > 0.0) || !std::isfinite(nu * nv * nw)) return false;
  f.u /= nu;
  f.v /= nv;
  f.w /= nw;
  scale = nu * nv * nw;
  return true;
}

// Best rank-1 approximation of one vectorized N×N×S tensor by alternating
// least squares from a random start.
CpFactors rank1_of(const Eigen::VectorXd& t, const Rank1Contractions& c, std::mt19937_64& rng) {
  CpFactors f = random_factors(c.n, c.s, rng);
  for (int sweep = 0; sweep < 10; ++sweep) {
    f.u = c.along_u(t, f.v, f.w);
    if (f.u.norm() == 0.0) break;
    f.u.normalize();
    f.v = c.along_v(t, f.u, f.w);
    if (f.v.norm() == 0.0) break;
    f.v.normalize();
    f.w = c.along_w(t, f.u, f.v);
    if (f.w.norm() == 0.0) break;
    f.w.normalize();
  }
  double scale = 0.0;
  if (!normalize_in_place(f, scale)) return random_factors(c.n, c.s, rng);
  return f;
}

constexpr Eigen::Index kBlock = 1024;

struct AtomUse {
  Eigen::Index patch;
  std::size_t slot;
};

// One block-coordinate step for atom k: ALS on ‖E − u∘v∘w∘cᵀ‖² over the
// residual E of the patches using it, started from the current factors and
// committed only if it does not increase their error.
void update_atom(std::size_t k, const std::vector<AtomUse>& use, std::size_t sweeps, const Rank1Contractions& con,
                 std::vector<CpFactors>& factors, std::vector<std::vector<CodeEntry>>& codes, Eigen::MatrixXd& resid,
                 Eigen::MatrixXd& dm) {
  const Eigen::Index dim = resid.rows();
  const auto m = static_cast<Eigen::Index>(use.size());
  Eigen::MatrixXd e(dim, m);
  Eigen::VectorXd c(m);
  double old_err = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const AtomUse& au = use[static_cast<std::size_t>(i)];
    c[i] = codes[static_cast<std::size_t>(au.patch)][au.slot].coeff;
    e.col(i) = resid.col(au.patch) + c[i] * dm.col(static_cast<Eigen::Index>(k));
    old_err += resid.col(au.patch).squaredNorm();
  }
  if (c.squaredNorm() == 0.0) return;

  CpFactors f = factors[k];
  bool ok = true;
  for (std::size_t sweep = 0; sweep < sweeps && ok; ++sweep) {
    const Eigen::VectorXd mc = e * c;
    const double cc = c.squaredNorm();
    f.u = con.along_u(mc, f.v, f.w) / (f.v.squaredNorm() * f.w.squaredNorm() * cc);
    f.v = con.along_v(mc, f.u, f.w) / (f.u.squaredNorm() * f.w.squaredNorm() * cc);
    f.w = con.along_w(mc, f.u, f.v) / (f.u.squaredNorm() * f.v.squaredNorm() * cc);
    const Eigen::VectorXd atom = outer3(f.u, f.v, f.w);
    const double an = atom.squaredNorm();
    if (!(an > 0.0) || !std::isfinite(an)) {
      ok = false;
      break;
    }
    c.noalias() = e.transpose() * atom / an;
    if (!(c.squaredNorm() > 0.0)) ok = false;
  }
  double scale = 0.0;
  if (!ok || !normalize_in_place(f, scale)) return;
  c *= scale;
  const Eigen::VectorXd atom = outer3(f.u, f.v, f.w);
  Eigen::MatrixXd new_resid = e;
  new_resid.noalias() -= atom * c.transpose();
  if (new_resid.squaredNorm() > old_err) return;

  factors[k] = f;
  dm.col(static_cast<Eigen::Index>(k)) = atom;
  for (Eigen::Index i = 0; i < m; ++i) {
    const AtomUse& au = use[static_cast<std::size_t>(i)];
    codes[static_cast<std::size_t>(au.patch)][au.slot].coeff = c[i];
    resid.col(au.patch) = new_resid.col(i);
  }
}

}  // namespace

TensorDictionary kcpd_train(std::span<const Tensor3> patches, const KcpdOptions& opts, KcpdTrace* trace) {
  if (patches.empty()) throw std::invalid_argument("kcpd_train needs at least one patch");
  if (opts.atoms < 1) throw std::invalid_argument("kcpd_train needs K >= 1");
  opts.coding.validate();
  const auto dims = patches.front().dims();
  if (dims[0] != dims[1]) throw std::invalid_argument("kcpd_train expects square patches");
  const std::size_t n = dims[0];
  const std::size_t channels = dims[2];
  const Rank1Contractions con{static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(channels)};
  const auto dim = static_cast<Eigen::Index>(n * n * channels);
  const auto count = static_cast<Eigen::Index>(patches.size());

  Eigen::MatrixXd x(dim, count);
  for (Eigen::Index p = 0; p < count; ++p) {
    const Tensor3& patch = patches[static_cast<std::size_t>(p)];
    if (patch.dims() != dims) throw std::invalid_argument("kcpd_train: patches must share dims");
    const CenteredPatch cp = remove_mean(patch);
    x.col(p) = Eigen::Map<const Eigen::VectorXd>(cp.centered.data().data(), dim);
  }

  // Start from rank-1 fits of distinct random patches; patches with nothing
  // left after mean removal (and any atoms beyond the patch count) start
  // from random factors.
  std::mt19937_64 rng(opts.seed);
  std::vector<Eigen::Index> pick(static_cast<std::size_t>(count));
  std::iota(pick.begin(), pick.end(), Eigen::Index{0});
  std::shuffle(pick.begin(), pick.end(), rng);
  std::vector<CpFactors> factors(opts.atoms);
  for (std::size_t k = 0; k < opts.atoms; ++k) {
    const bool from_data = k < pick.size() && x.col(pick[k]).squaredNorm() > 0.0;
    factors[k] = from_data ? rank1_of(x.col(pick[k]), con, rng) : random_factors(con.n, con.s, rng);
  }

  std::vector<std::vector<CodeEntry>> codes(patches.size());
  Eigen::MatrixXd resid = x;  // x − D·A for the current codes
  if (trace) {
    trace->objective.assign(1, resid.squaredNorm());
    trace->reseeded_atoms.clear();
  }

  for (std::size_t iter = 0; iter < opts.iterations; ++iter) {
    // Coding: a patch takes the new OMP code only if it fits at least as well.
    TensorDictionary dict(n, channels, factors);
    const Eigen::MatrixXd& d = dict.matrix();
    detail::GramOmp omp(dict.gram(), opts.coding, static_cast<std::size_t>(dim));
    Eigen::MatrixXd alpha0;
    Eigen::VectorXd r(dim);
    for (Eigen::Index start = 0; start < count; start += kBlock) {
      const Eigen::Index cols = std::min(kBlock, count - start);
      alpha0.noalias() = d.transpose() * x.middleCols(start, cols);
      for (Eigen::Index j = 0; j < cols; ++j) {
        const Eigen::Index p = start + j;
        std::vector<CodeEntry> fresh = omp.encode(alpha0.col(j), x.col(p).squaredNorm());
        r = x.col(p);
        for (const CodeEntry& e : fresh) r.noalias() -= e.coeff * d.col(e.atom);
        if (r.squaredNorm() <= resid.col(p).squaredNorm()) {
          codes[static_cast<std::size_t>(p)] = std::move(fresh);
          resid.col(p) = r;
        }
      }
    }

    std::vector<std::vector<AtomUse>> users(opts.atoms);
    for (std::size_t p = 0; p < codes.size(); ++p) {
      for (std::size_t slot = 0; slot < codes[p].size(); ++slot) {
        users[codes[p][slot].atom].push_back({static_cast<Eigen::Index>(p), slot});
      }
    }

    // Atom updates: block-coordinate descent on ‖E − u∘v∘w∘c‖² for the
    // residual E each atom is responsible for.
    Eigen::MatrixXd dm = d;
    std::vector<std::size_t> unused;
    for (std::size_t k = 0; k < opts.atoms; ++k) {
      const auto& use = users[k];
      if (use.empty()) {
        unused.push_back(k);
        continue;
      }
      update_atom(k, use, opts.als_sweeps, con, factors, codes, resid, dm);
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(count));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const Eigen::VectorXd err = resid.colwise().squaredNorm().transpose();
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return err[a] > err[b]; });
    std::size_t next_seed = 0;
    const auto seed_atom = [&]() {
      const std::size_t i = next_seed++;
      const bool has_residual = i < order.size() && err[order[i]] > 0.0;
      return has_residual ? rank1_of(resid.col(order[i]), con, rng) : random_factors(con.n, con.s, rng);
    };

    // Unused atoms carry no coefficients, so re-seeding them leaves the
    // objective unchanged.
    for (std::size_t k : unused) factors[k] = seed_atom();

    if (trace) {
      trace->objective.push_back(resid.squaredNorm());
      trace->reseeded_atoms.push_back(unused.size());
    }
  }
  return TensorDictionary(n, channels, std::move(factors));
}

}  // namespace sct
