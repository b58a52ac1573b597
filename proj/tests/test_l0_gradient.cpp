#include "spectral_ct/l0_gradient.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>

using namespace sct;
using sct::testing::random_tensor;

namespace {

// Periodic backward-difference matrices on an nx×ny grid (i1 fastest).
Eigen::MatrixXd periodic_difference(std::size_t nx, std::size_t ny, bool along_i1) {
  const auto n = static_cast<Eigen::Index>(nx * ny);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i2 = 0; i2 < ny; ++i2) {
    for (std::size_t i1 = 0; i1 < nx; ++i1) {
      const auto row = static_cast<Eigen::Index>(i1 + nx * i2);
      const std::size_t p1 = along_i1 ? (i1 + nx - 1) % nx : i1;
      const std::size_t p2 = along_i1 ? i2 : (i2 + ny - 1) % ny;
      d(row, row) += 1.0;
      d(row, static_cast<Eigen::Index>(p1 + nx * p2)) -= 1.0;
    }
  }
  return d;
}

Eigen::Map<const Eigen::VectorXd> vec(const Tensor2& t) {
  return Eigen::Map<const Eigen::VectorXd>(t.data().data(), static_cast<Eigen::Index>(t.size()));
}

Tensor2 step_edge(std::size_t n, double height) {
  Tensor2 t({n, n});
  for (std::size_t i2 = 0; i2 < n; ++i2) {
    for (std::size_t i1 = n / 2; i1 < n; ++i1) t(i1, i2) = height;
  }
  return t;
}

// Pixels whose periodic gradient magnitude exceeds tol; the FFT solve leaves
// round-off where the exact count would see structure.
std::size_t edges_above(const Tensor2& u, double tol) {
  const GradientPair g = periodic_gradient(u);
  std::size_t n = 0;
  for (std::size_t i = 0; i < u.size(); ++i) n += std::hypot(g.h.data()[i], g.v.data()[i]) > tol;
  return n;
}

}  // namespace

TEST(GradientL0, StepEdgeCountIgnoresHeight) {
  const std::size_t ref = gradient_l0_norm(step_edge(16, 1.0));
  EXPECT_EQ(ref, 16u);
  for (double h : {0.1, 10.0, -3.0, 1e-6}) EXPECT_EQ(gradient_l0_norm(step_edge(16, h)), ref) << "height " << h;
}

TEST(GradientL0, CountsPixelsNotDirections) {
  Tensor2 t({8, 8});
  EXPECT_EQ(gradient_l0_norm(t), 0u);
  t(4, 4) = 2.0;
  // The pixel itself (both differences) and its two forward neighbours.
  EXPECT_EQ(gradient_l0_norm(t), 3u);
  Tensor2 corner({8, 8});
  corner(0, 0) = 1.0;
  EXPECT_EQ(gradient_l0_norm(corner), 2u);
  EXPECT_EQ(gradient_l0_norm(Tensor2({5, 7}, 4.2)), 0u);
}

TEST(GradientL0, PeriodicGradientMatchesDifferenceMatrices) {
  std::mt19937_64 rng(1);
  const Tensor2 u = random_tensor<2>({6, 5}, rng);
  const GradientPair g = periodic_gradient(u);
  EXPECT_LE((vec(g.h) - periodic_difference(6, 5, true) * vec(u)).norm(), 1e-14);
  EXPECT_LE((vec(g.v) - periodic_difference(6, 5, false) * vec(u)).norm(), 1e-14);
}

TEST(HardThreshold, MatchesBruteForceOverTwoCandidates) {
  std::mt19937_64 rng(2);
  const Tensor2 gx = random_tensor<2>({400, 250}, rng);
  const Tensor2 gy = random_tensor<2>({400, 250}, rng);
  std::uniform_real_distribution<double> ld(0.0, 0.1), td(1.0, 100.0);
  const double lambda_star = ld(rng), tau = td(rng);
  const GradientPair r = hard_threshold(gx, gy, lambda_star / tau);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < gx.size(); ++i) {
    const double a = gx.data()[i], b = gy.data()[i];
    // Cost of (0, 0) versus keeping the gradient; ties go to zero.
    const double keep_zero = tau * (a * a + b * b), keep_grad = lambda_star;
    const bool zero = keep_zero <= keep_grad;
    zeros += zero;
    ASSERT_EQ(r.h.data()[i], zero ? 0.0 : a) << i;
    ASSERT_EQ(r.v.data()[i], zero ? 0.0 : b) << i;
  }
  EXPECT_GT(zeros, 0u);
  EXPECT_LT(zeros, gx.size());
}

TEST(HardThreshold, TieAtThresholdGoesToZero) {
  Tensor2 gx({1, 1}, 0.6), gy({1, 1}, 0.8);
  const GradientPair r = hard_threshold(gx, gy, 1.0);
  EXPECT_EQ(r.h(0, 0), 0.0);
  EXPECT_EQ(r.v(0, 0), 0.0);
  const GradientPair k = hard_threshold(gx, gy, 0.999);
  EXPECT_EQ(k.h(0, 0), 0.6);
}

TEST(FftSolve, MatchesDenseNormalEquations) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd dx = periodic_difference(8, 8, true), dy = periodic_difference(8, 8, false);
  const Eigen::MatrixXd lap = dx.transpose() * dx + dy.transpose() * dy;
  std::uniform_real_distribution<double> td(1e-3, 1e3);
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor2 w = random_tensor<2>({8, 8}, rng);
    const GradientPair p{random_tensor<2>({8, 8}, rng), random_tensor<2>({8, 8}, rng)};
    const double tau = td(rng);
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(64, 64) + tau * lap;
    const Eigen::VectorXd b = vec(w) + tau * (dx.transpose() * vec(p.h) + dy.transpose() * vec(p.v));
    const Eigen::VectorXd expect = a.ldlt().solve(b);
    const Tensor2 got = fft_quadratic_solve(w, p, tau);
    worst = std::max(worst, (vec(got) - expect).norm() / expect.norm());
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LE(worst, 1e-6);
  EXPECT_LT(seconds, 5.0);
}

TEST(FftSolve, NonSquareGridAndReusableWorkspace) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd dx = periodic_difference(6, 4, true), dy = periodic_difference(6, 4, false);
  L0Smoother smoother(6, 4);
  for (int trial = 0; trial < 3; ++trial) {
    const Tensor2 w = random_tensor<2>({6, 4}, rng);
    const GradientPair p{random_tensor<2>({6, 4}, rng), random_tensor<2>({6, 4}, rng)};
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(24, 24) + 2.0 * (dx.transpose() * dx + dy.transpose() * dy);
    const Eigen::VectorXd expect = a.ldlt().solve(vec(w) + 2.0 * (dx.transpose() * vec(p.h) + dy.transpose() * vec(p.v)));
    EXPECT_LE((vec(smoother.solve(w, p, 2.0)) - expect).norm(), 1e-10 * expect.norm());
  }
  EXPECT_THROW(smoother.solve(Tensor2({4, 6}), GradientPair{Tensor2({4, 6}), Tensor2({4, 6})}, 1.0),
               std::invalid_argument);
}

TEST(L0Smooth, ZeroWeightIsIdentity) {
  std::mt19937_64 rng(5);
  const Tensor2 w = random_tensor<2>({12, 10}, rng);
  const Tensor2 u = l0_smooth(w, L0Schedule{0.0, 1e-3, 1e5, 2.0});
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(u.data()[i], w.data()[i], 1e-10);
}

TEST(L0Smooth, FlattensNoisyPiecewiseConstantImage) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> noise(0.0, 0.02);
  Tensor2 clean({32, 32});
  for (std::size_t i2 = 0; i2 < 32; ++i2) {
    for (std::size_t i1 = 0; i1 < 32; ++i1) clean(i1, i2) = (i1 >= 10 && i1 < 22 && i2 >= 8 && i2 < 24) ? 1.0 : 0.2;
  }
  Tensor2 w = clean;
  for (double& v : w.data()) v += noise(rng);
  const L0Schedule sched = L0Schedule::for_lambda(0.02);
  const Tensor2 u = l0_smooth(w, sched);
  EXPECT_LT(edges_above(u, 1e-3), edges_above(w, 1e-3) / 4);
  double err_w = 0.0, err_u = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    err_w += (w.data()[i] - clean.data()[i]) * (w.data()[i] - clean.data()[i]);
    err_u += (u.data()[i] - clean.data()[i]) * (u.data()[i] - clean.data()[i]);
  }
  EXPECT_LT(err_u, err_w);
  EXPECT_LT(l0_penalized_energy(u, w, sched.lambda_star, sched.tau_max),
            l0_penalized_energy(w, w, sched.lambda_star, sched.tau_max));
}

TEST(L0Smooth, ConstantImageIsFixedPoint) {
  const Tensor2 w({9, 9}, 0.37);
  const Tensor2 u = l0_smooth(w, L0Schedule::for_lambda(0.1));
  for (double v : u.data()) EXPECT_NEAR(v, 0.37, 1e-12);
}

TEST(L0Schedule, DefaultsAndValidation) {
  const L0Schedule s = L0Schedule::for_lambda(2.6e-4);
  EXPECT_DOUBLE_EQ(s.tau0, 5.2e-4);
  EXPECT_NO_THROW(s.validate());
  EXPECT_THROW((L0Schedule{1e-3, 1e-3, 1e5, 1.0}.validate()), std::invalid_argument);
  EXPECT_THROW((L0Schedule{-1.0, 1e-3, 1e5, 2.0}.validate()), std::invalid_argument);
  EXPECT_THROW((L0Schedule{1e-3, 0.0, 1e5, 2.0}.validate()), std::invalid_argument);
}
