// Serial reference loops against the OpenMP kernels. Arg 0 is serial, 1 is parallel.
#include <benchmark/benchmark.h>

#include "matchvar/constants.hpp"
#include "matchvar/matching.hpp"
#include "matchvar/rng.hpp"
#include "matchvar/simulation.hpp"
#include "matchvar/voronoi_mc.hpp"

namespace {

using matchvar::Execution;

Execution exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::kSerial : Execution::kParallel;
}

void BM_AlphaMonteCarlo(benchmark::State& state) {
  const matchvar::constants::MonteCarloOptions opts{1'000'000, 7, exec_of(state)};
  for (auto _ : state) benchmark::DoNotOptimize(matchvar::constants::alpha_d_monte_carlo(3, opts).value);
  state.SetItemsProcessed(state.iterations() * opts.samples);
}
BENCHMARK(BM_AlphaMonteCarlo)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_AlphaMdQuadrature(benchmark::State& state) {
  const matchvar::constants::GridSpec grid{256, 1};
  for (auto _ : state) {
    benchmark::DoNotOptimize(matchvar::constants::alpha_Md_quadrature(4, 3, grid, exec_of(state)).value);
  }
}
BENCHMARK(BM_AlphaMdQuadrature)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_CatchmentMoments(benchmark::State& state) {
  const auto spec = matchvar::voronoi::uniform_torus(2);
  matchvar::voronoi::ExperimentOptions opts;
  opts.n = 2000;
  opts.replications = 64;
  opts.seed = 11;
  opts.execution = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(matchvar::voronoi::theorem31_experiment(spec, opts).second_moment);
  state.SetItemsProcessed(state.iterations() * opts.replications);
}
BENCHMARK(BM_CatchmentMoments)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_FindMatches(benchmark::State& state) {
  const auto dgp = matchvar::simulation::preset("linear-logistic-e", 4);
  matchvar::RngStream rng(5);
  const auto sim = matchvar::simulation::simulate(dgp, 100'000, rng, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(matchvar::matching::find_matches(sim.data, 4, exec_of(state)).times_used.data());
  }
}
BENCHMARK(BM_FindMatches)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
