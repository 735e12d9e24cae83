#include <benchmark/benchmark.h>

#include "blockfill/balancing.hpp"
#include "blockfill/partition.hpp"
#include "blockfill/rng.hpp"
#include "blockfill/spectral.hpp"

using namespace blockfill;

namespace {

Matrix randn(Index n, Index m, std::uint64_t seed) {
  RngStream rng(seed);
  Matrix g(n, m);
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < n; ++i) g(i, j) = rng.normal();
  return g;
}

Matrix random_spd(Index p, std::uint64_t seed) {
  const Matrix g = randn(p, p, seed);
  return g * g.transpose() + Matrix::Identity(p, p);
}

}  // namespace

static void BM_TruncatedSvd(benchmark::State& state) {
  const Index n = state.range(0);
  const Matrix m = randn(n, n, 1);
  for (auto _ : state)
    benchmark::DoNotOptimize(spectral::truncated_svd(m, n / 4));
}
BENCHMARK(BM_TruncatedSvd)->Arg(16)->Arg(64)->Arg(128);

static void BM_SvdPerturbationCheck(benchmark::State& state) {
  const Index n = state.range(0);
  const Matrix mstar = randn(n, n, 2);
  const Matrix mhat = mstar + 1e-3 * randn(n, n, 3);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        spectral::svd_perturbation_check(mstar, mhat, n / 4, 0.5));
}
BENCHMARK(BM_SvdPerturbationCheck)->Arg(16)->Arg(64);

static void BM_PsiBal(benchmark::State& state) {
  const Index p = state.range(0);
  const Matrix x = random_spd(p, 4);
  const Matrix y = random_spd(p, 5);
  for (auto _ : state) benchmark::DoNotOptimize(balancing::psi_bal(x, y));
}
BENCHMARK(BM_PsiBal)->Arg(8)->Arg(32)->Arg(64);

static void BM_WellTemperedPartition(benchmark::State& state) {
  const Index len = state.range(0);
  Vector sigmas(len);
  double cur = 1.0;
  for (Index i = 0; i < len; ++i) {
    sigmas[i] = cur;
    cur *= 0.8;
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(
        partition::well_tempered_partition(sigmas, len, sigmas[len - 1]));
}
BENCHMARK(BM_WellTemperedPartition)->Arg(16)->Arg(64);
