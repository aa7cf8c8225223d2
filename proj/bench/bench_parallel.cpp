// Parallel kernels against their serial references. On a single core the
// two sides should be within noise of each other.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>

#include "lupts/features.hpp"
#include "lupts/harness.hpp"
#include "lupts/kernels.hpp"

using namespace lupts;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n;
  Matrix a(rows, cols);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
  return a;
}

void BM_GramParallel(benchmark::State& state) {
  const Matrix x = random_matrix(state.range(0), 10, 1);
  const Kernel k = Kernel::gaussian(0.1);
  for (auto _ : state) benchmark::DoNotOptimize(gram(k, x, x));
}

void BM_GramSerial(benchmark::State& state) {
  const Matrix x = random_matrix(state.range(0), 10, 1);
  const Kernel k = Kernel::gaussian(0.1);
  for (auto _ : state) benchmark::DoNotOptimize(gram_serial(k, x, x));
}

void BM_ApplyMapParallel(benchmark::State& state) {
  const Matrix x = random_matrix(state.range(0), 10, 2);
  const FeatureMap f = FeatureMap::rff(10, 500, 0.1, 3);
  for (auto _ : state) benchmark::DoNotOptimize(apply_map(f, x));
}

void BM_ApplyMapSerial(benchmark::State& state) {
  const Matrix x = random_matrix(state.range(0), 10, 2);
  const FeatureMap f = FeatureMap::rff(10, 500, 0.1, 3);
  for (auto _ : state) benchmark::DoNotOptimize(apply_map_serial(f, x));
}

void BM_Experiment(benchmark::State& state) {
  ExperimentConfig cfg;
  cfg.dgp = DgpConfig{};
  cfg.roster = {"ols", "lupts", "ols_rff", "lupts_rff"};
  cfg.sample_sizes = {200};
  cfg.repetitions = 8;
  cfg.models.tuning.rf_draws = 3;
  const int jobs = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(run_experiment(cfg, jobs));
}

}  // namespace

BENCHMARK(BM_GramParallel)->Arg(200)->Arg(1000);
BENCHMARK(BM_GramSerial)->Arg(200)->Arg(1000);
BENCHMARK(BM_ApplyMapParallel)->Arg(1000)->Arg(10000);
BENCHMARK(BM_ApplyMapSerial)->Arg(1000)->Arg(10000);
BENCHMARK(BM_Experiment)->Arg(1)->Arg(omp_get_max_threads())->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
