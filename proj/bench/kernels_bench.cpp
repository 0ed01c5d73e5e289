#include <benchmark/benchmark.h>

#include "mmfusion/kernels.hpp"
#include "mmfusion/rng.hpp"

using namespace mmfusion;

namespace {

// Shapes of the largest layers: IEMOCAP encoder (500 x 712) on a batch of 100.
void shapes(benchmark::internal::Benchmark* b) {
  b->Args({150, 273, 100});
  b->Args({500, 712, 100});
}

Matrix random(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  return gaussian_sample(rng, r, c);
}

void BM_MatmulSerial(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const Matrix a = random(m, k, 1), b = random(k, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(serial::matmul(a, b));
}

void BM_MatmulParallel(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const Matrix a = random(m, k, 1), b = random(k, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
}

void BM_MatmulTnSerial(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const Matrix a = random(m, k, 1), g = random(m, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(serial::matmul_tn(a, g));
}

void BM_MatmulTnParallel(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const Matrix a = random(m, k, 1), g = random(m, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul_tn(a, g));
}

}  // namespace

BENCHMARK(BM_MatmulSerial)->Apply(shapes);
BENCHMARK(BM_MatmulParallel)->Apply(shapes);
BENCHMARK(BM_MatmulTnSerial)->Apply(shapes);
BENCHMARK(BM_MatmulTnParallel)->Apply(shapes);

BENCHMARK_MAIN();
