// Curvature probe cost: finite-difference HVPs and power iteration.

#include <benchmark/benchmark.h>

#include "vollab/curvature.hpp"
#include "vollab/objective.hpp"
#include "vollab/rng.hpp"

namespace {

using namespace vollab;

QuadraticObjective make_quadratic(std::size_t n) {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(n));
  Rng rng(11, 0xCF);
  for (Eigen::Index i = 0; i < B.rows(); ++i)
    for (Eigen::Index j = 0; j < B.cols(); ++j) B(i, j) = rng.normal();
  Eigen::MatrixXd A = 0.5 * (B + B.transpose());
  return QuadraticObjective(std::move(A));
}

void BM_Hvp(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const QuadraticObjective obj = make_quadratic(n);
  Rng rng(5, 0xD0);
  std::vector<double> theta(n), v(n);
  for (double& x : theta) x = rng.normal();
  for (double& x : v) x = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(hvp(obj, theta, v));
}

void BM_LambdaMax(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const QuadraticObjective obj = make_quadratic(n);
  Rng rng(5, 0xD1);
  std::vector<double> theta(n);
  for (double& x : theta) x = rng.normal();
  for (auto _ : state)
    benchmark::DoNotOptimize(lambda_max(obj, theta, 50, 1e-6, 9));
}

}  // namespace

BENCHMARK(BM_Hvp)->Arg(256)->Arg(1024);
BENCHMARK(BM_LambdaMax)->Arg(256)->Arg(1024);
