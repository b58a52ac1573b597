#include "spectral_ct/patch_grid.hpp"
#include "spectral_ct/tensor.hpp"
#include "spectral_ct/tensor_file.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

using namespace sct;
using sct::testing::random_tensor;

TEST(ModeProduct, IdentityLeavesTensorUnchanged) {
  std::mt19937_64 rng(1);
  const Tensor3 t = random_tensor<3>({3, 4, 5}, rng);
  for (std::size_t n = 0; n < 3; ++n) {
    const Tensor3 r = mode_n_product(t, Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(t.dim(n)),
                                                                  static_cast<Eigen::Index>(t.dim(n))),
                                     n);
    EXPECT_EQ(r, t) << "mode " << n;
  }
}

TEST(ModeProduct, MatchesTripleLoop) {
  std::mt19937_64 rng(2);
  const Tensor3 t = random_tensor<3>({2, 3, 4}, rng);
  const Eigen::MatrixXd m = Eigen::MatrixXd::Random(5, 3);
  const Tensor3 r = mode_n_product(t, m, 1);
  ASSERT_EQ(r.dims(), (Tensor3::Dims{2, 5, 4}));
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t j = 0; j < 5; ++j) {
      for (std::size_t c = 0; c < 4; ++c) {
        double s = 0.0;
        for (std::size_t b = 0; b < 3; ++b) s += m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(b)) * t(a, b, c);
        EXPECT_NEAR(r(a, j, c), s, 1e-14);
      }
    }
  }
}

TEST(ModeProduct, FourthModeWithRowVectorIsWeightedSum) {
  std::mt19937_64 rng(3);
  const Tensor4 d = random_tensor<4>({2, 2, 3, 4}, rng);
  const std::vector<double> a{0.5, -1.0, 2.0, 0.25};
  Eigen::MatrixXd row(1, 4);
  for (int k = 0; k < 4; ++k) row(0, k) = a[static_cast<std::size_t>(k)];
  const Tensor4 p = mode_n_product(d, row, 3);
  const Tensor3 c = contract_last(d, a);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      for (std::size_t s = 0; s < 3; ++s) {
        double expect = 0.0;
        for (std::size_t k = 0; k < 4; ++k) expect += a[k] * d(i, j, s, k);
        EXPECT_NEAR(c(i, j, s), expect, 1e-14);
        EXPECT_NEAR(p(i, j, s, 0), expect, 1e-14);
      }
    }
  }
}

TEST(ModeProduct, RejectsMismatchedMatrix) {
  const Tensor3 t({2, 3, 4});
  EXPECT_THROW(mode_n_product(t, Eigen::MatrixXd::Zero(2, 2), 1), std::invalid_argument);
  EXPECT_THROW(mode_n_product(t, Eigen::MatrixXd::Zero(2, 2), 3), std::invalid_argument);
}

TEST(PatchGrid, ConstantImageGivesConstantPatches) {
  const Tensor3 x({10, 9, 2}, 3.5);
  const PatchGrid grid(4, 3, x.dims());
  for (std::size_t r = 0; r < grid.size(); ++r) {
    const Tensor3 p = extract_patch(x, grid, r);
    for (double v : p.data()) EXPECT_EQ(v, 3.5);
  }
}

TEST(PatchGrid, OneHotLandsAtRelativeOffset) {
  Tensor3 x({8, 8, 2});
  x(5, 3, 1) = 1.0;
  const PatchGrid grid(4, 1, x.dims());
  for (std::size_t r = 0; r < grid.size(); ++r) {
    const auto pos = grid.at(r);
    const Tensor3 p = extract_patch(x, grid, r);
    const bool inside = pos.i1 <= 5 && 5 < pos.i1 + 4 && pos.i2 <= 3 && 3 < pos.i2 + 4;
    double sum = 0.0;
    for (double v : p.data()) sum += v;
    EXPECT_EQ(sum, inside ? 1.0 : 0.0);
    if (inside) EXPECT_EQ(p(5 - pos.i1, 3 - pos.i2, 1), 1.0);
  }
}

TEST(PatchGrid, LastPositionAlwaysIncluded) {
  const PatchGrid grid(4, 3, {11, 8, 1});
  std::size_t max1 = 0, max2 = 0;
  for (const auto& p : grid.positions()) {
    max1 = std::max(max1, p.i1);
    max2 = std::max(max2, p.i2);
  }
  EXPECT_EQ(max1, 7u);
  EXPECT_EQ(max2, 4u);
}

TEST(PatchGrid, AggregateOfExtractIsCoverageTimesImage) {
  std::mt19937_64 rng(4);
  const Tensor3 x = random_tensor<3>({12, 10, 3}, rng);
  const PatchGrid grid(5, 2, x.dims());
  const Tensor3 agg = aggregate_columns(extract_all(x, grid), grid);
  // Direct summation: every patch adds its window of x.
  Tensor3 expect(x.dims());
  for (const auto& pos : grid.positions()) {
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t b = 0; b < 5; ++b) {
        for (std::size_t a = 0; a < 5; ++a) expect(pos.i1 + a, pos.i2 + b, s) += x(pos.i1 + a, pos.i2 + b, s);
      }
    }
  }
  const Tensor3 cov = coverage_map(grid);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(agg.data()[i], expect.data()[i], 1e-12);
    EXPECT_NEAR(agg.data()[i], cov.data()[i] * x.data()[i], 1e-12);
  }
}

TEST(PatchGrid, ExtractionAndAggregationAreAdjoint) {
  std::mt19937_64 rng(5);
  const Tensor3 x = random_tensor<3>({9, 9, 2}, rng);
  const PatchGrid grid(3, 2, x.dims());
  for (std::size_t r = 0; r < grid.size(); r += 3) {
    const Tensor3 p = random_tensor<3>({3, 3, 2}, rng);
    std::vector<Tensor3> only(grid.size(), Tensor3({3, 3, 2}));
    only[r] = p;
    const double lhs = inner(extract_patch(x, grid, r), p);
    const double rhs = inner(x, aggregate_patches(only, grid));
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(PatchGrid, ColumnAndTensorFormsAgree) {
  std::mt19937_64 rng(6);
  const Tensor3 x = random_tensor<3>({7, 6, 2}, rng);
  const PatchGrid grid(3, 2, x.dims());
  const Eigen::MatrixXd cols = extract_all(x, grid);
  std::vector<Tensor3> patches;
  for (std::size_t r = 0; r < grid.size(); ++r) {
    patches.push_back(extract_patch(x, grid, r));
    for (std::size_t k = 0; k < patches.back().size(); ++k) {
      EXPECT_EQ(cols(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(r)), patches.back().data()[k]);
    }
  }
  EXPECT_EQ(aggregate_patches(patches, grid), aggregate_columns(cols, grid));
}

TEST(Coverage, AllOnesPatchesGiveCoverage) {
  const PatchGrid grid(3, 2, {8, 7, 2});
  const std::vector<Tensor3> ones(grid.size(), Tensor3({3, 3, 2}, 1.0));
  EXPECT_EQ(aggregate_patches(ones, grid), coverage_map(grid));
}

TEST(Coverage, InteriorPixelCoveredByNSquaredPatches) {
  const PatchGrid grid(4, 1, {16, 16, 1});
  const Tensor3 cov = coverage_map(grid);
  for (std::size_t i2 = 3; i2 <= 12; ++i2) {
    for (std::size_t i1 = 3; i1 <= 12; ++i1) EXPECT_EQ(cov(i1, i2, 0), 16.0);
  }
  EXPECT_EQ(cov(0, 0, 0), 1.0);
  EXPECT_EQ(cov(1, 0, 0), 2.0);
}

TEST(Coverage, NonOverlappingAndUnitPatchesCountOnce) {
  const Tensor3 tiles = coverage_map(PatchGrid(4, 4, {16, 8, 2}));
  const Tensor3 pixels = coverage_map(PatchGrid(1, 1, {5, 6, 3}));
  for (const double v : tiles.data()) EXPECT_EQ(v, 1.0);
  for (const double v : pixels.data()) EXPECT_EQ(v, 1.0);
}

TEST(PatchGrid, RejectsBadSizes) {
  EXPECT_THROW(PatchGrid(0, 1, {4, 4, 1}), std::invalid_argument);
  EXPECT_THROW(PatchGrid(2, 0, {4, 4, 1}), std::invalid_argument);
  EXPECT_THROW(PatchGrid(5, 1, {4, 4, 1}), std::invalid_argument);
  const PatchGrid grid(2, 1, {4, 4, 1});
  EXPECT_THROW(grid.at(grid.size()), std::out_of_range);
  EXPECT_THROW(extract_all(Tensor3({5, 4, 1}), grid), std::invalid_argument);
}

TEST(TensorFile, Float64RoundTripIsExact) {
  std::mt19937_64 rng(7);
  const Tensor3 t = random_tensor<3>({3, 4, 5}, rng);
  const auto path = std::filesystem::temp_directory_path() / "sct_tensor_rt64.tensor";
  write_tensor(path, t, TensorPrecision::float64);
  EXPECT_EQ(read_tensor3(path), t);
  std::filesystem::remove(path);
}

TEST(TensorFile, Float32RoundTripIsSinglePrecision) {
  std::mt19937_64 rng(8);
  const Tensor4 t = random_tensor<4>({2, 3, 2, 2}, rng);
  const auto path = std::filesystem::temp_directory_path() / "sct_tensor_rt32.tensor";
  write_tensor(path, t);
  const Tensor4 r = read_tensor4(path);
  ASSERT_EQ(r.dims(), t.dims());
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(r.data()[i], static_cast<double>(static_cast<float>(t.data()[i])));
  std::filesystem::remove(path);
}

TEST(TensorFile, RejectsCorruptInput) {
  const std::vector<std::size_t> dims{2, 2, 1};
  const std::vector<double> vals{1, 2, 3, 4};
  std::string bytes = encode_tensor(dims, vals, TensorPrecision::float32);
  EXPECT_NO_THROW(decode_tensor(bytes));
  EXPECT_THROW(decode_tensor(bytes.substr(0, bytes.size() - 1)), std::runtime_error);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_tensor(bad), std::runtime_error);
  EXPECT_THROW(read_tensor3("/nonexistent/dir/x.tensor"), std::runtime_error);
}

TEST(TensorFile, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
