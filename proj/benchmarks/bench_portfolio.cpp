// Daily quintile rebalancing and turnover accounting over a synthetic panel.

#include <benchmark/benchmark.h>

#include "vollab/portfolio.hpp"
#include "vollab/rng.hpp"

namespace {

using namespace vollab;

ForecastPanel make_panel(std::size_t n_assets, std::size_t n_days) {
  ForecastPanel panel;
  Rng rng(17, 0xF0);
  for (std::size_t d = 0; d < n_days; ++d) {
    ForecastDay day;
    day.date = static_cast<std::int64_t>(d);
    for (std::size_t a = 0; a < n_assets; ++a) {
      day.assets.push_back(static_cast<std::int64_t>(a));
      day.forecast.push_back(1.0 + rng.unit());
      day.next_ret.push_back(0.01 * rng.normal());
    }
    panel.days.push_back(std::move(day));
  }
  return panel;
}

void BM_PortfolioReturns(benchmark::State& state) {
  const auto n_assets = static_cast<std::size_t>(state.range(0));
  const ForecastPanel panel = make_panel(n_assets, 252);
  for (auto _ : state)
    benchmark::DoNotOptimize(portfolio_returns(panel, kQuintiles - 1));
}

}  // namespace

BENCHMARK(BM_PortfolioReturns)->Arg(50)->Arg(500);
