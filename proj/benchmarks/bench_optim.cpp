// Optimizer step cost, dominated by Newton-Schulz orthogonalization for Muon.

#include <benchmark/benchmark.h>

#include "vollab/optim.hpp"
#include "vollab/rng.hpp"
#include "vollab/tensor.hpp"

namespace {

using namespace vollab;

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Tensor t({r, c});
  Rng rng(seed, 0xAB);
  for (double& v : t.v) v = rng.normal();
  return t;
}

void BM_NewtonSchulz(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor M = random_matrix(n, n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(newton_schulz(M, 5));
}

}  // namespace

BENCHMARK(BM_NewtonSchulz)->Arg(64)->Arg(128)->Arg(256)->Arg(512);
