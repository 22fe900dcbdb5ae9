// Serial reference against OpenMP for the two parallel kernels.
// Thread count follows FEDPERISIM_THREADS / OMP_NUM_THREADS.
#include <benchmark/benchmark.h>

#include <vector>

#include "fedperi/common/rng.hpp"
#include "fedperi/evalstats/bootstrap.hpp"
#include "fedperi/kernels/gemm.hpp"

using namespace fedperi;

namespace {

std::vector<double> random_matrix(std::size_t n, std::uint64_t seed) {
  KeyedRng rng(seed, "bench.matrix");
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal(0.0, 1.0);
  return v;
}

template <auto Kernel>
void BM_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n * n, 1), b = random_matrix(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    std::fill(c.begin(), c.end(), 0.0);
    Kernel(a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

evalstats::ScoredSet scored_set(std::size_t n) {
  evalstats::ScoredSet s;
  KeyedRng rng(3, "bench.scores");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < s.n_outcomes; ++k) {
      const bool y = rng.bernoulli(0.2);
      s.labels.push_back(y);
      s.scores.push_back(rng.normal(y ? 1.0 : 0.0, 1.0));
    }
  return s;
}

template <auto Kernel>
void BM_bootstrap(benchmark::State& state) {
  const auto set = scored_set(static_cast<std::size_t>(state.range(0)));
  evalstats::BootstrapOptions opts;
  opts.replicates = 200;
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(set, opts, 0).values.data());
}

}  // namespace

BENCHMARK(BM_gemm<kernels::gemm_nn_serial>)->Arg(64)->Arg(256);
BENCHMARK(BM_gemm<kernels::gemm_nn_omp>)->Arg(64)->Arg(256);
BENCHMARK(BM_gemm<kernels::gemm_tn_serial>)->Arg(64)->Arg(256);
BENCHMARK(BM_gemm<kernels::gemm_tn_omp>)->Arg(64)->Arg(256);
BENCHMARK(BM_bootstrap<evalstats::bootstrap_replicates_serial>)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_bootstrap<evalstats::bootstrap_replicates_omp>)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
