#include "spectral_ct/fbp.hpp"
#include "spectral_ct/metrics.hpp"
#include "spectral_ct/recon.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace sct;
using sct::testing::dense_system_matrix;
using sct::testing::random_tensor;
using sct::testing::small_geometry;
using sct::testing::to_eigen;

namespace {

Tensor3 disk_phantom(std::size_t n, std::size_t channels) {
  Tensor3 t({n, n, channels});
  const double c = 0.5 * static_cast<double>(n - 1), r = 0.35 * static_cast<double>(n);
  for (std::size_t s = 0; s < channels; ++s) {
    for (std::size_t i2 = 0; i2 < n; ++i2) {
      for (std::size_t i1 = 0; i1 < n; ++i1) {
        const double x = static_cast<double>(i1) - c, y = static_cast<double>(i2) - c;
        if (x * x + y * y <= r * r) t(i1, i2, s) = 0.3 / static_cast<double>(s + 1);
        if ((x - 2) * (x - 2) + y * y <= 4.0) t(i1, i2, s) = 0.6;
      }
    }
  }
  return t;
}

Tensor3 project_all(const Projector& p, const Tensor3& img) {
  const std::size_t det = p.detector_count(), views = p.view_count();
  Tensor3 sino({det, views, img.dim(2)});
  for (std::size_t s = 0; s < img.dim(2); ++s) {
    const auto y = p.forward(img.slab(s));
    std::copy(y.begin(), y.end(), sino.slab(s).begin());
  }
  return sino;
}

double mean_rmse(const Tensor3& a, const Tensor3& b) {
  double sum = 0.0;
  for (std::size_t s = 0; s < a.dim(2); ++s) sum += rmse(a.slab(s), b.slab(s));
  return sum / static_cast<double>(a.dim(2));
}

// A small two-channel problem shared by the degeneracy tests.
struct SmallProblem {
  ScanGeometry g = small_geometry(16, 20);
  Projector projector{g};
  Tensor3 truth = disk_phantom(16, 2);
  Tensor3 sino = project_all(projector, truth);
  TensorDictionary dict = TensorDictionary::random(4, 2, 16, 3);
  ReconParams params;

  SmallProblem() {
    params.patch_size = 4;
    params.patch_stride = 2;
    params.atoms = 16;
    params.sparsity = 3;
    params.iterations = 10;
    params.subsets = 4;
    params.eta = 0.05;
    params.sigma = 0.5;
    params.lambda_star = 1e-3;
  }
  ReconInputs inputs() const { return {projector, sino, Tensor3(truth.dims()), &truth, 1.0}; }
};

}  // namespace

TEST(Normalize, ScaleIsPriorMaximum) {
  Tensor3 prior({2, 2, 2});
  prior(1, 0, 1) = 0.8;
  prior(0, 1, 0) = -2.0;
  EXPECT_EQ(normalization_scale(prior), 0.8);
  EXPECT_EQ(normalization_scale(Tensor3({2, 2, 1}, -1.0)), 1.0);
  std::mt19937_64 rng(1);
  const Tensor3 sino = random_tensor<3>({5, 4, 2}, rng);
  const NormalizedSinogram n = normalize(sino, prior);
  EXPECT_EQ(n.scale, 0.8);
  const Tensor3 back = denormalize(n.sino, n.scale);
  for (std::size_t i = 0; i < sino.size(); ++i) EXPECT_NEAR(back.data()[i], sino.data()[i], 1e-15);
}

TEST(Weights, LambdaAndBetaMatchDirectSummation) {
  const ScanGeometry g = small_geometry(8, 4);
  const Projector p(g);
  const Eigen::MatrixXd a = dense_system_matrix(g);
  const double ata1 = (a * Eigen::VectorXd::Ones(a.cols())).squaredNorm();  // Σ_j [Aᵀ(A1)]_j
  for (std::size_t stride : {1u, 3u}) {
    const PatchGrid grid(4, stride, {8, 8, 3});
    double cov = 0.0;
    for (std::size_t r = 0; r < grid.size(); ++r) cov += 4.0 * 4.0 * 3.0;
    const double expect = 1.6 * 3.0 * ata1 / cov;
    EXPECT_NEAR(compute_lambda(1.6, p, grid), expect, 1e-12 * expect);
    EXPECT_NEAR(compute_beta(1.6, p, grid), expect, 1e-12 * expect);
    for (double k : {0.0, 0.5, 7.0}) {
      EXPECT_NEAR(compute_lambda(1.6 * k, p, grid), k * expect, 1e-12 * expect);
      EXPECT_NEAR(compute_beta(5.7 * k, p, grid), k * compute_beta(5.7, p, grid), 1e-12 * expect);
    }
  }
  EXPECT_THROW(compute_lambda(-1.0, p, PatchGrid(4, 1, {8, 8, 1})), std::invalid_argument);
  EXPECT_THROW(compute_lambda(1.0, p, PatchGrid(4, 1, {9, 8, 1})), std::invalid_argument);
}

TEST(Sqs, SubsetStepMatchesDenseOracle) {
  const ScanGeometry g = small_geometry(8, 6);
  const Projector p(g);
  const Eigen::MatrixXd a = dense_system_matrix(g);
  std::mt19937_64 rng(2);
  const Tensor3 sino = random_tensor<3>({g.detector_count, 6, 1}, rng, 0.0, 2.0);
  const PatchGrid grid(3, 1, {8, 8, 1});
  const Tensor3 cov = coverage_map(grid);
  const SqsUpdater sqs(p, sino, 3, cov);
  ReconState st;
  st.x = random_tensor<3>({8, 8, 1}, rng, 0.0, 1.0);
  st.u = random_tensor<3>({8, 8, 1}, rng, 0.0, 1.0);
  st.t = random_tensor<3>({8, 8, 1}, rng, -0.1, 0.1);
  st.lambda = 0.7;
  st.beta = 0.3;
  const Tensor3 patch_sum = random_tensor<3>({8, 8, 1}, rng, 0.0, 5.0);
  const Eigen::VectorXd x0 = to_eigen(st.x.data());
  sqs.update(st, 1, patch_sum);

  // Rows of the subset, scaled by the subset count.
  const auto& views = sqs.subset_views(1);
  Eigen::MatrixXd am(static_cast<Eigen::Index>(views.size() * g.detector_count), a.cols());
  Eigen::VectorXd ym(am.rows());
  for (std::size_t i = 0; i < views.size(); ++i) {
    for (std::size_t j = 0; j < g.detector_count; ++j) {
      const auto row = static_cast<Eigen::Index>(i * g.detector_count + j);
      am.row(row) = a.row(static_cast<Eigen::Index>(views[i] * g.detector_count + j));
      ym(row) = sino(j, views[i], 0);
    }
  }
  const Eigen::VectorXd c = to_eigen(cov.data()), ps = to_eigen(patch_sum.data());
  const Eigen::VectorXd u = to_eigen(st.u.data()), t = to_eigen(st.t.data());
  const Eigen::VectorXd num = 3.0 * am.transpose() * (am * x0 - ym) + 0.7 * (c.cwiseProduct(x0) - ps) + 0.3 * (x0 - u - t);
  const Eigen::VectorXd den = 3.0 * am.transpose() * (am * Eigen::VectorXd::Ones(a.cols())) + 0.7 * c +
                              Eigen::VectorXd::Constant(a.cols(), 0.3);
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    const double expect = std::max(0.0, x0(i) - num(i) / den(i));
    EXPECT_NEAR(st.x.data()[static_cast<std::size_t>(i)], expect, 1e-12 * (1.0 + std::abs(expect)));
  }
}

TEST(Sqs, RejectsMismatchedInputs) {
  const ScanGeometry g = small_geometry(8, 6);
  const Projector p(g);
  const Tensor3 sino({g.detector_count, 6, 1});
  EXPECT_THROW(SqsUpdater(p, Tensor3({3, 6, 1}), 2, Tensor3({8, 8, 1})), std::invalid_argument);
  EXPECT_THROW(SqsUpdater(p, sino, 2, Tensor3({8, 8, 2})), std::invalid_argument);
  EXPECT_THROW(SqsUpdater(p, sino, 7, Tensor3({8, 8, 1})), std::invalid_argument);
}

TEST(Multiplier, AddsSplittingResidual) {
  std::mt19937_64 rng(3);
  ReconState st;
  st.x = random_tensor<3>({3, 3, 2}, rng);
  st.u = random_tensor<3>({3, 3, 2}, rng);
  st.t = random_tensor<3>({3, 3, 2}, rng);
  const Tensor3 t0 = st.t;
  multiplier_update(st);
  for (std::size_t i = 0; i < t0.size(); ++i) {
    EXPECT_EQ(st.t.data()[i], t0.data()[i] + st.u.data()[i] - st.x.data()[i]);
  }
  st.u = Tensor3({2, 2, 2});
  EXPECT_THROW(multiplier_update(st), std::invalid_argument);
}

TEST(Degeneracy, ZeroSigmaGivesTdlTrajectory) {
  SmallProblem sp;
  sp.params.sigma = 0.0;
  const ReconResult tdl = tdl_reconstruct(sp.inputs(), sp.dict, sp.params);
  const ReconResult l0 = l0tdl_reconstruct(sp.inputs(), sp.dict, sp.params);
  EXPECT_EQ(l0.beta, 0.0);
  EXPECT_GT(l0.lambda, 0.0);
  ASSERT_EQ(l0.history.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(l0.history[i].rmse, tdl.history[i].rmse) << i;
  EXPECT_EQ(l0.image, tdl.image);
}

TEST(Degeneracy, ZeroEtaGivesOsSqs) {
  SmallProblem sp;
  sp.params.eta = 0.0;
  const ReconResult tdl = tdl_reconstruct(sp.inputs(), sp.dict, sp.params);
  const ReconResult os = os_sqs_reconstruct(sp.inputs(), sp.params);
  EXPECT_EQ(tdl.lambda, 0.0);
  EXPECT_EQ(tdl.image, os.image);
}

TEST(Reconstruction, IterativeBeatsFbpOnSparseNoiselessData) {
  const ScanGeometry g = desk_geometry(40);
  const Projector p(g);
  const Tensor3 truth = disk_phantom(64, 1);
  const Tensor3 sino = project_all(p, truth);
  const Tensor3 fbp = fbp_all_channels(sino, g);
  ReconParams params;
  params.iterations = 40;
  params.subsets = 8;
  const ReconResult os = os_sqs_reconstruct({p, sino, Tensor3(truth.dims()), &truth, 1.0}, params);
  EXPECT_LT(mean_rmse(os.image, truth), mean_rmse(fbp, truth));
  // The data term keeps falling.
  EXPECT_LT(os.history.back().data_fidelity, os.history.front().data_fidelity);
}

TEST(Reconstruction, OutputsAreNonNegativeAndHistoryComplete) {
  SmallProblem sp;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.05);
  for (double& v : sp.sino.data()) v += noise(rng);
  const ReconInputs in = sp.inputs();
  for (const ReconResult& r :
       {os_sqs_reconstruct(in, sp.params), tv_reconstruct(in, sp.params), tdl_reconstruct(in, sp.dict, sp.params),
        l0tdl_reconstruct(in, sp.dict, sp.params)}) {
    for (double v : r.image.data()) EXPECT_GE(v, 0.0);
    ASSERT_EQ(r.history.size(), 10u);
    EXPECT_EQ(r.history.back().iteration, 10u);
    EXPECT_EQ(r.history.back().rmse.size(), 2u);
  }
}

TEST(Reconstruction, RejectsMismatchedDictionary) {
  SmallProblem sp;
  const TensorDictionary wrong = TensorDictionary::random(5, 2, 4, 1);
  EXPECT_THROW(tdl_reconstruct(sp.inputs(), wrong, sp.params), std::invalid_argument);
  ReconInputs in = sp.inputs();
  in.initial = Tensor3({16, 16, 3});
  EXPECT_THROW(os_sqs_reconstruct(in, sp.params), std::invalid_argument);
  sp.params.eta = -1.0;
  EXPECT_THROW(tdl_reconstruct(sp.inputs(), sp.dict, sp.params), std::invalid_argument);
}

TEST(Presets, DeskProportionsKeepRatios) {
  const ReconParams a = find_preset("sim-80view").params;
  const ReconParams b = find_preset("sim-160view").params;
  const ReconParams da = desk_proportioned(a), db = desk_proportioned(b);
  EXPECT_DOUBLE_EQ(da.eta / db.eta, a.eta / b.eta);
  EXPECT_DOUBLE_EQ(da.sigma / db.sigma, a.sigma / b.sigma);
  EXPECT_EQ(da.lambda_star, a.lambda_star);
  EXPECT_EQ(da.epsilon, a.epsilon);
  EXPECT_THROW(find_preset("nope"), std::invalid_argument);
}

TEST(Tv, SeminormOfStepEdge) {
  Tensor2 t({10, 6});
  for (std::size_t i2 = 0; i2 < 6; ++i2) {
    for (std::size_t i1 = 5; i1 < 10; ++i1) t(i1, i2) = 0.4;
  }
  EXPECT_NEAR(tv_seminorm(t), 6 * 0.4, 1e-15);
  EXPECT_EQ(tv_seminorm(Tensor2({4, 4}, 3.0)), 0.0);
}

TEST(Tv, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  const Tensor2 x = random_tensor<2>({6, 5}, rng);
  const double eps = 1e-2;
  const auto smoothed = [&](const Tensor2& y) {
    double s = 0.0;
    for (std::size_t j = 0; j < y.dim(1); ++j) {
      for (std::size_t i = 0; i < y.dim(0); ++i) {
        const double dx = i > 0 ? y(i, j) - y(i - 1, j) : 0.0;
        const double dy = j > 0 ? y(i, j) - y(i, j - 1) : 0.0;
        s += std::sqrt(dx * dx + dy * dy + eps);
      }
    }
    return s;
  };
  const Tensor2 g = tv_gradient(x, eps);
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor2 hi = x, lo = x;
    hi.data()[i] += 1e-6;
    lo.data()[i] -= 1e-6;
    EXPECT_NEAR(g.data()[i], (smoothed(hi) - smoothed(lo)) / 2e-6, 1e-6);
  }
}
