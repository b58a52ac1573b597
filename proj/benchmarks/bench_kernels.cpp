#include "spectral_ct/dictionary.hpp"
#include "spectral_ct/geometry.hpp"
#include "spectral_ct/l0_gradient.hpp"
#include "spectral_ct/metrics.hpp"
#include "spectral_ct/patch_grid.hpp"
#include "spectral_ct/projector.hpp"
#include "spectral_ct/simulator.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace sct;

namespace {

// Desk phantom, first energy channel.
Tensor2 desk_image() {
  const MaterialBasis b = xcom_basis({"soft", "bone", "iodine"}, desk_channel_edges());
  return channel(rasterize_phantom(thorax_phantom(64, 64, 0.6), b).spectral, 0);
}

Tensor2 noisy(const Tensor2& t, double sd) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, sd);
  Tensor2 out = t;
  for (double& v : out.data()) v += g(rng);
  return out;
}

void BM_ForwardProject(benchmark::State& state) {
  const Projector p(desk_geometry(static_cast<std::size_t>(state.range(0))));
  const Tensor2 img = desk_image();
  for (auto _ : state) benchmark::DoNotOptimize(p.forward(img.data()));
}
BENCHMARK(BM_ForwardProject)->Arg(80)->Arg(640)->Unit(benchmark::kMillisecond);

void BM_BackProject(benchmark::State& state) {
  const Projector p(desk_geometry(80));
  const std::vector<double> sino = p.forward(desk_image().data());
  for (auto _ : state) benchmark::DoNotOptimize(p.back(sino));
}
BENCHMARK(BM_BackProject)->Unit(benchmark::kMillisecond);

// OMP of every 8×8×4 patch of the desk image against K atoms.
void BM_MompAllPatches(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const TensorDictionary d = TensorDictionary::random(8, 4, k, 1);
  const MaterialBasis b = xcom_basis({"soft", "bone", "iodine"}, desk_channel_edges());
  const Tensor3 img = rasterize_phantom(thorax_phantom(64, 64, 0.6), b).spectral;
  const PatchGrid grid(8, 1, img.dims());
  Eigen::MatrixXd cols = extract_all(img, grid);
  const Eigen::MatrixXd means = column_channel_means(cols, 4);
  for (Eigen::Index r = 0; r < cols.cols(); ++r) {
    for (Eigen::Index s = 0; s < 4; ++s) cols.col(r).segment(s * 64, 64).array() -= means(s, r);
  }
  for (auto _ : state) benchmark::DoNotOptimize(omp_columns(cols, d, CodingConfig{11, 1.5e-3}));
  state.SetItemsProcessed(state.iterations() * cols.cols());
}
BENCHMARK(BM_MompAllPatches)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_L0Smooth(benchmark::State& state) {
  const Tensor2 w = noisy(desk_image(), 0.01);
  L0Smoother smoother(64, 64);
  const L0Schedule sched = L0Schedule::for_lambda(2.6e-4);
  for (auto _ : state) benchmark::DoNotOptimize(smoother.smooth(w, sched));
}
BENCHMARK(BM_L0Smooth)->Unit(benchmark::kMillisecond);

void BM_Fsim(benchmark::State& state) {
  const Tensor2 a = desk_image();
  const Tensor2 b = noisy(a, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(fsim(a, b, 1.0));
}
BENCHMARK(BM_Fsim)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
