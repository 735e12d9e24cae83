#include <benchmark/benchmark.h>

#include "blockfill/datagen.hpp"
#include "blockfill/erm.hpp"
#include "blockfill/risk.hpp"

using namespace blockfill;

static void BM_AlsFit(benchmark::State& state) {
  const Index rank = state.range(0);
  const auto inst = datagen::make_instance_poly(40, 40, 28, 28, 8, 2.0, 1.0, 1);
  const auto samples = datagen::exact_cells(inst, datagen::Dist::Train);
  erm::SolverOptions opts;
  opts.restarts = 1;
  opts.max_sweeps = 25;
  opts.seed = 7;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        erm::fit_factorized(samples, inst.n, inst.m, rank, opts));
}
BENCHMARK(BM_AlsFit)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

static void BM_RiskFastPath(benchmark::State& state) {
  const Index n = state.range(0);
  const auto inst =
      datagen::make_instance_poly(n, n, 2 * n / 3, 2 * n / 3, 6, 2.0, 1.0, 2);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        risk::risk(inst.Fstar, inst.Gstar, inst, datagen::Dist::Train));
}
BENCHMARK(BM_RiskFastPath)->Arg(30)->Arg(60)->Arg(120);

static void BM_DoubleStage(benchmark::State& state) {
  const auto inst = datagen::make_instance_poly(40, 40, 28, 28, 8, 3.0, 1.0, 3);
  erm::ErmConfig cfg;
  cfg.p = 6;
  cfg.r_cut = 2;
  cfg.sigma_cut = 0.5 * (inst.spectrum[1] + inst.spectrum[2]);
  cfg.mu = 1e-8;
  cfg.exact_expectation = true;
  cfg.solver.restarts = 1;
  cfg.solver.seed = 11;
  for (auto _ : state)
    benchmark::DoNotOptimize(erm::erm_double_stage(inst, cfg));
}
BENCHMARK(BM_DoubleStage)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
