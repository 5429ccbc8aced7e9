// Serial vs OpenMP pairwise cosine over random unit-ish embeddings.
#include "toolsmith/similarity.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

toolsmith::EmbeddingMatrix random_matrix(size_t rows, size_t dim) {
  std::mt19937_64 rng(rows * 7919 + dim);
  std::normal_distribution<double> n(0.0, 1.0);
  toolsmith::EmbeddingMatrix m{rows, dim, std::vector<double>(rows * dim)};
  for (auto& x : m.data) x = n(rng);
  return m;
}

void args(benchmark::internal::Benchmark* b) {
  for (int rows : {64, 256, 1024}) b->Args({rows, 256});
  b->Args({256, 1536});
}

void BM_CosineSerial(benchmark::State& state) {
  const auto m = random_matrix(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(toolsmith::cosine_matrix_serial(m));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

void BM_CosineParallel(benchmark::State& state) {
  const auto m = random_matrix(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(toolsmith::cosine_matrix_parallel(m));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

}  // namespace

BENCHMARK(BM_CosineSerial)->Apply(args)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_CosineParallel)->Apply(args)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
