// Serial reference vs OpenMP GEMM kernels at the shapes training hits:
// whole-sequence input projections, per-step recurrent products, and the
// weight-gradient reductions.
//
//   ./build/bench/bench_kernels --benchmark_filter=nn
//   OMP_NUM_THREADS=4 ./build/bench/bench_kernels

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "slukit/kernels.hpp"

namespace {

using slukit::kernels::GemmDims;
using Kernel = void (*)(GemmDims, std::span<const double>,
                        std::span<const double>, std::span<double>, bool);

void run(benchmark::State& state, Kernel kernel) {
  const GemmDims d{static_cast<std::size_t>(state.range(0)),
                   static_cast<std::size_t>(state.range(1)),
                   static_cast<std::size_t>(state.range(2))};
  std::mt19937_64 rng(0);
  std::uniform_real_distribution<double> uni(-1, 1);
  std::vector<double> a(d.m * d.k), b(d.k * d.n), c(d.m * d.n);
  for (double& x : a) x = uni(rng);
  for (double& x : b) x = uni(rng);
  for (auto _ : state) {
    kernel(d, a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<long>(state.iterations() * d.m * d.k * d.n));
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({16, 64, 256})      // one recurrent step, batch 16
      ->Args({320, 64, 256})  // input projection of a 16×20 batch
      ->Args({320, 128, 128})
      ->Args({1024, 256, 256});
}

void BM_nn_serial(benchmark::State& s) { run(s, slukit::kernels::serial::gemm_nn); }
void BM_nn_parallel(benchmark::State& s) { run(s, slukit::kernels::parallel::gemm_nn); }
void BM_nt_serial(benchmark::State& s) { run(s, slukit::kernels::serial::gemm_nt); }
void BM_nt_parallel(benchmark::State& s) { run(s, slukit::kernels::parallel::gemm_nt); }
void BM_tn_serial(benchmark::State& s) { run(s, slukit::kernels::serial::gemm_tn); }
void BM_tn_parallel(benchmark::State& s) { run(s, slukit::kernels::parallel::gemm_tn); }

}  // namespace

BENCHMARK(BM_nn_serial)->Apply(shapes);
BENCHMARK(BM_nn_parallel)->Apply(shapes);
BENCHMARK(BM_nt_serial)->Apply(shapes);
BENCHMARK(BM_nt_parallel)->Apply(shapes);
BENCHMARK(BM_tn_serial)->Apply(shapes);
BENCHMARK(BM_tn_parallel)->Apply(shapes);

BENCHMARK_MAIN();
