#include "spdregime/layers/layers.hpp"
#include "spdregime/spd/geometry.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

namespace {

using namespace spdregime;
using spd::Matrix;
using spd::SPDMatrix;
using spd::SymMatrix;

SPDMatrix random_spd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Matrix a(n, 2 * n);
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < n; ++i) a(i, j) = z(rng);
  return SPDMatrix(SymMatrix(a * a.transpose() / (2.0 * n) + 0.05 * Matrix::Identity(n, n)));
}

void BM_SymEig(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const SymMatrix s = random_spd(static_cast<int>(state.range(0)), rng).sym();
  for (auto _ : state) benchmark::DoNotOptimize(spd::sym_eig(s));
}
BENCHMARK(BM_SymEig)->Arg(10)->Arg(20)->Arg(40)->Arg(60)->Unit(benchmark::kMicrosecond);

void BM_KarcherMean(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::vector<SPDMatrix> batch;
  for (int i = 0; i < 30; ++i) batch.push_back(random_spd(static_cast<int>(state.range(0)), rng));
  for (auto _ : state) benchmark::DoNotOptimize(spd::karcher_mean(batch));
}
BENCHMARK(BM_KarcherMean)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_AffineDistance(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const int n = static_cast<int>(state.range(0));
  const SPDMatrix a = random_spd(n, rng);
  const SPDMatrix b = random_spd(n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(spd::affine_distance(a, b));
}
BENCHMARK(BM_AffineDistance)->Arg(20)->Arg(60)->Unit(benchmark::kMicrosecond);

void BM_StiefelStep(benchmark::State& state) {
  std::mt19937_64 rng(4);
  Matrix w = layers::random_stiefel(60, 20, rng);
  Matrix m = Matrix::Zero(60, 20);
  const Matrix g = 1e-3 * Matrix::Random(60, 20);
  for (auto _ : state) {
    layers::stiefel_step(w, g, m, 1e-3, 0.9);
    benchmark::DoNotOptimize(w.data());
  }
}
BENCHMARK(BM_StiefelStep)->Unit(benchmark::kMicrosecond);

}  // namespace
