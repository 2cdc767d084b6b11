// Forward/backward throughput per architecture on synthetic batches.

#include <benchmark/benchmark.h>

#include "vollab/engine.hpp"
#include "vollab/model.hpp"
#include "vollab/rng.hpp"

namespace {

using namespace vollab;

ModelConfig small_cfg(Arch a) {
  ModelConfig m;
  m.arch = a;
  m.L = 100;
  m.mlp.hidden = {128, 64};
  m.cnn.channels = {16, 32};
  m.cnn.head = {64};
  m.lstm.hidden = 32;
  m.tf.d_model = 32;
  m.tf.heads = 4;
  m.tf.head = {32};
  return m;
}

void fill_batch(std::vector<double>& X, std::vector<double>& y, std::size_t n,
                std::size_t L) {
  Rng rng(7, 0xBE);
  X.resize(n * L);
  y.resize(n);
  for (double& v : X) v = rng.normal();
  for (double& v : y) v = rng.normal();
}

void BM_Forward(benchmark::State& state, Arch a) {
  const ModelConfig cfg = small_cfg(a);
  const Parameters p = init_params(cfg, 1);
  std::vector<double> X, y;
  const std::size_t n = 64;
  fill_batch(X, y, n, cfg.L);
  for (auto _ : state)
    benchmark::DoNotOptimize(forward_loss(p, X.data(), y.data(), n));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * n);
}

void BM_Grad(benchmark::State& state, Arch a) {
  const ModelConfig cfg = small_cfg(a);
  const Parameters p = init_params(cfg, 1);
  std::vector<double> X, y;
  const std::size_t n = 64;
  fill_batch(X, y, n, cfg.L);
  Gradients g = Gradients::zeros_like(p);
  for (auto _ : state)
    benchmark::DoNotOptimize(grad(p, X.data(), y.data(), n, g));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * n);
}

}  // namespace

BENCHMARK_CAPTURE(BM_Forward, mlp, Arch::MLP);
BENCHMARK_CAPTURE(BM_Forward, cnn, Arch::CNN);
BENCHMARK_CAPTURE(BM_Forward, lstm, Arch::LSTM);
BENCHMARK_CAPTURE(BM_Forward, transformer, Arch::Transformer);
BENCHMARK_CAPTURE(BM_Grad, mlp, Arch::MLP);
BENCHMARK_CAPTURE(BM_Grad, cnn, Arch::CNN);
BENCHMARK_CAPTURE(BM_Grad, lstm, Arch::LSTM);
BENCHMARK_CAPTURE(BM_Grad, transformer, Arch::Transformer);

BENCHMARK_MAIN();
