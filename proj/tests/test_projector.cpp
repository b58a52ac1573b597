#include "spectral_ct/fbp.hpp"
#include "spectral_ct/geometry.hpp"
#include "spectral_ct/projector.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>

using namespace sct;
using sct::testing::dense_system_matrix;
using sct::testing::random_vector;
using sct::testing::small_geometry;
using sct::testing::to_eigen;

namespace {

std::vector<double> disk(const ScanGeometry& g, double radius_mm, double value) {
  std::vector<double> img(g.pixel_count(), 0.0);
  const double cx = 0.5 * static_cast<double>(g.image_nx - 1);
  const double cy = 0.5 * static_cast<double>(g.image_ny - 1);
  for (std::size_t i2 = 0; i2 < g.image_ny; ++i2) {
    for (std::size_t i1 = 0; i1 < g.image_nx; ++i1) {
      const double x = (static_cast<double>(i1) - cx) * g.pixel_size_mm;
      const double y = (static_cast<double>(i2) - cy) * g.pixel_size_mm;
      if (x * x + y * y <= radius_mm * radius_mm) img[i1 + g.image_nx * i2] = value;
    }
  }
  return img;
}

}  // namespace

TEST(Geometry, SubsampleKeepsEveryEighthView) {
  const auto v = subsample_views(640, 80);
  ASSERT_EQ(v.size(), 80u);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], 8 * i);
}

TEST(Geometry, NonDividingSubsampleUsesFloor) {
  const auto v = subsample_views(640, 106);
  ASSERT_EQ(v.size(), 106u);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], (i * 640) / 106);
  EXPECT_THROW(subsample_views(10, 11), std::invalid_argument);
  EXPECT_THROW(subsample_views(10, 0), std::invalid_argument);
}

TEST(Geometry, OrderedSubsetsPartitionViews) {
  const auto subsets = ordered_subsets(80, 10);
  ASSERT_EQ(subsets.size(), 10u);
  std::vector<int> seen(80, 0);
  for (std::size_t m = 0; m < subsets.size(); ++m) {
    for (std::size_t v : subsets[m]) {
      EXPECT_EQ(v % 10, m);
      ++seen[v];
    }
  }
  for (int c : seen) EXPECT_EQ(c, 1);
}

TEST(Geometry, ValidationRejectsBadScans) {
  ScanGeometry g = small_geometry(8, 4);
  EXPECT_NO_THROW(g.validate());
  g.source_to_detector_mm = g.source_to_center_mm;
  EXPECT_THROW(g.validate(), std::invalid_argument);
  g = small_geometry(8, 4);
  g.view_angles = {0.5, 0.5};
  EXPECT_THROW(g.validate(), std::invalid_argument);
  g = small_geometry(8, 4);
  g.pixel_size_mm = 100.0;
  EXPECT_THROW(g.validate(), std::invalid_argument);
}

TEST(Projector, ZeroImageGivesZeroSinogram) {
  const Projector p(small_geometry(8, 6));
  for (double v : p.forward(std::vector<double>(p.pixel_count(), 0.0))) EXPECT_EQ(v, 0.0);
  for (double v : p.back(std::vector<double>(p.view_count() * p.detector_count(), 0.0))) EXPECT_EQ(v, 0.0);
}

TEST(Projector, CentralChordOfDiskIsDiameter) {
  ScanGeometry g = desk_geometry(16);
  g.detector_count = 129;  // an odd count puts a cell on the central ray
  const double rho = 12.0;
  const Projector p(g);
  const std::vector<double> sino = p.forward(disk(g, rho, 1.0));
  // A pixel is in the disk when its centre is, so each chord end can move by
  // up to half a pixel diagonal on oblique views.
  const double bound_cm = std::numbers::sqrt2 * g.pixel_size_mm * 0.1;
  for (std::size_t v = 0; v < g.view_count(); ++v) {
    EXPECT_NEAR(sino[v * g.detector_count + 64], 2.0 * rho * 0.1, bound_cm) << "view " << v;
  }
}

TEST(Projector, SingleRayBackprojectionIsChordLengths) {
  const ScanGeometry g = small_geometry(12, 5);
  const Projector p(g);
  const std::size_t view = 2, det = 17;
  std::vector<double> sino(g.view_count() * g.detector_count, 0.0);
  sino[view * g.detector_count + det] = 1.0;
  const std::vector<double> img = p.back(sino);

  // March along the ray in tiny steps and credit each pixel with the
  // distance travelled inside it.
  const double th = g.view_angles[view];
  const double R = g.source_to_center_mm, D = g.source_to_detector_mm, t = g.detector_position(det);
  const double sx = R * std::cos(th), sy = R * std::sin(th);
  const double dx = (R - D) * std::cos(th) - t * std::sin(th), dy = (R - D) * std::sin(th) + t * std::cos(th);
  const double len = std::hypot(dx - sx, dy - sy);
  const std::size_t steps = 2'000'000;
  const double h = len / static_cast<double>(steps);
  std::vector<double> marched(g.pixel_count(), 0.0);
  const double half = 0.5 * static_cast<double>(g.image_nx) * g.pixel_size_mm;
  for (std::size_t k = 0; k < steps; ++k) {
    const double f = (static_cast<double>(k) + 0.5) / static_cast<double>(steps);
    const double x = sx + f * (dx - sx), y = sy + f * (dy - sy);
    const double u = (x + half) / g.pixel_size_mm, w = (y + half) / g.pixel_size_mm;
    if (u < 0 || w < 0 || u >= static_cast<double>(g.image_nx) || w >= static_cast<double>(g.image_ny)) continue;
    marched[static_cast<std::size_t>(u) + g.image_nx * static_cast<std::size_t>(w)] += h * 0.1;
  }
  double total = 0.0;
  // Marching misplaces at most one step at each pixel boundary.
  const double resolution = 2.0 * h * 0.1;
  for (std::size_t i = 0; i < img.size(); ++i) {
    EXPECT_NEAR(img[i], marched[i], resolution) << "pixel " << i;
    if (marched[i] == 0.0) EXPECT_LT(img[i], 1e-6);
    total += img[i];
  }
  EXPECT_GT(total, 0.0);
}

TEST(Projector, AdjointIdentityAgainstDenseMatrix) {
  const ScanGeometry g = small_geometry(16, 12);
  const Projector p(g);
  const Eigen::MatrixXd a = dense_system_matrix(g);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = random_vector(g.pixel_count(), rng);
    const auto y = random_vector(g.view_count() * g.detector_count, rng);
    const Eigen::VectorXd ax = to_eigen(p.forward(x));
    const Eigen::VectorXd aty = to_eigen(p.back(y));
    EXPECT_LE((ax - a * to_eigen(x)).norm(), 1e-12 * (1.0 + ax.norm()));
    EXPECT_LE((aty - a.transpose() * to_eigen(y)).norm(), 1e-12 * (1.0 + aty.norm()));
    const double lhs = ax.dot(to_eigen(y)), rhs = to_eigen(x).dot(aty);
    EXPECT_LE(std::abs(lhs - rhs) / (to_eigen(x).norm() * to_eigen(y).norm()), 1e-10);
  }
}

TEST(Projector, SubsetProjectionMatchesRows) {
  const ScanGeometry g = small_geometry(10, 8);
  const Projector p(g);
  std::mt19937_64 rng(12);
  const auto x = random_vector(g.pixel_count(), rng);
  const auto full = p.forward(x);
  const std::vector<std::size_t> views{1, 5, 6};
  const auto part = p.forward(x, views);
  for (std::size_t i = 0; i < views.size(); ++i) {
    for (std::size_t j = 0; j < g.detector_count; ++j) {
      EXPECT_EQ(part[i * g.detector_count + j], full[views[i] * g.detector_count + j]);
    }
  }
  EXPECT_THROW(p.forward(x, std::vector<std::size_t>{8}), std::out_of_range);
  EXPECT_THROW(p.forward(std::vector<double>(3)), std::invalid_argument);
}

TEST(Projector, SqsDenominatorMatchesDenseOracle) {
  const ScanGeometry g = small_geometry(16, 10);
  const Projector p(g);
  const Eigen::MatrixXd a = dense_system_matrix(g);
  const Eigen::VectorXd row_sums = a.rowwise().sum();
  const Eigen::VectorXd expect = a.transpose() * row_sums;
  const auto got = p.sqs_denominator();
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_GE(got[i], 0.0);
    EXPECT_NEAR(got[i], expect(static_cast<Eigen::Index>(i)), 1e-12 * (1.0 + expect(static_cast<Eigen::Index>(i))));
  }
}

TEST(Projector, PixelsOutsideEveryFanHaveZeroDenominator) {
  ScanGeometry g = small_geometry(16, 1);
  g.detector_count = 3;  // a narrow fan through the centre only
  const Projector p(g);
  const auto d = p.sqs_denominator();
  EXPECT_EQ(d[0], 0.0);
  EXPECT_EQ(d[g.pixel_count() - 1], 0.0);
  EXPECT_GT(d[g.image_nx / 2 + g.image_nx * (g.image_ny / 2)], 0.0);
}

TEST(Fbp, ZeroSinogramGivesZeroImage) {
  const ScanGeometry g = desk_geometry(32);
  for (double v : fbp_reconstruct(std::vector<double>(g.view_count() * g.detector_count, 0.0), g)) EXPECT_EQ(v, 0.0);
}

TEST(Fbp, NoiselessDiskWithinThreePercent) {
  const ScanGeometry g = desk_geometry(640);
  const Projector p(g);
  const double mu = 0.25;
  const std::vector<double> truth = disk(g, 12.0, mu);
  const std::vector<double> rec = fbp_reconstruct(p.forward(truth), g);
  // Score inside the field of view and away from the edge, where ramp
  // filtering of the jump rings over a couple of pixels.
  const double c = 0.5 * static_cast<double>(g.image_nx - 1);
  double err = 0.0, inside = 0.0;
  std::size_t n = 0, n_inside = 0;
  for (std::size_t i2 = 0; i2 < g.image_ny; ++i2) {
    for (std::size_t i1 = 0; i1 < g.image_nx; ++i1) {
      const double r = std::hypot(static_cast<double>(i1) - c, static_cast<double>(i2) - c) * g.pixel_size_mm;
      if (r >= g.fov_radius_mm() || std::abs(r - 12.0) <= 2.0 * g.pixel_size_mm) continue;
      const std::size_t i = i1 + g.image_nx * i2;
      err += (rec[i] - truth[i]) * (rec[i] - truth[i]);
      ++n;
      if (r < 12.0) {
        inside += rec[i];
        ++n_inside;
      }
    }
  }
  EXPECT_LT(std::sqrt(err / static_cast<double>(n)), 0.03 * mu);
  EXPECT_NEAR(inside / static_cast<double>(n_inside), mu, 0.01 * mu);
}

TEST(Fbp, IsLinear) {
  const ScanGeometry g = desk_geometry(64);
  std::mt19937_64 rng(13);
  const auto s = random_vector(g.view_count() * g.detector_count, rng, 0.0, 1.0);
  auto s3 = s;
  for (double& v : s3) v *= 3.0;
  const auto a = fbp_reconstruct(s, g), b = fbp_reconstruct(s3, g);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i], 3.0 * a[i], 1e-12 * (1.0 + std::abs(b[i])));
  EXPECT_THROW(fbp_reconstruct(std::vector<double>(5), g), std::invalid_argument);
}
