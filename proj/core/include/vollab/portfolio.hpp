#pragma once
// Volatility-quintile portfolios built from per-date forecasts: ascending
// quintile assignment, equal-weight daily reconstitution, drift-adjusted
// turnover, performance summaries (annualized return/vol, Sharpe, max
// drawdown), rolling turnover, and the Sharpe-turnover frontier table.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace vollab {

// ============================================================================
// Forecast panel
// ============================================================================

// One rebalance date: assets (sorted ascending by id) with their volatility
// forecasts and the simple return each realizes over the following day.
// A missing next-day return is marked NaN.
struct ForecastDay {
  std::int64_t date = 0;
  std::vector<std::int64_t> assets;
  std::vector<double> forecast;
  std::vector<double> next_ret;
};

struct ForecastPanel {
  std::vector<ForecastDay> days;     // strictly increasing dates
  std::size_t skipped_dates = 0;     // dates dropped for having < 5 assets
};

// ============================================================================
// Quintile assignment
// ============================================================================

constexpr int kQuintiles = 5;

// Assigns each asset a bucket 0..4 (0 = lowest forecast). Sort is ascending
// by (forecast, asset-id); bucket sizes are n/5 each with the remainder going
// to the lower buckets, e.g. 7 assets -> sizes (2,2,1,1,1). Throws
// ConfigError with fewer than 5 assets.
std::vector<int> quintile_sort(const std::vector<std::int64_t>& asset_ids,
                               const std::vector<double>& forecasts);

// ============================================================================
// Portfolio series
// ============================================================================

struct PortfolioSeries {
  std::vector<std::int64_t> dates;  // rebalance dates
  std::vector<std::vector<std::int64_t>> held;  // members after drops
  std::vector<std::vector<double>> weights;     // target weights, sum to 1
  std::vector<double> ret;           // realized return to the next date
  // Both turnover readings, one value per rebalance after the first
  // (length dates.size() - 1).
  std::vector<double> turnover_drift;   // vs. drifted pre-rebalance weights
  std::vector<double> turnover_target;  // vs. previous target weights
  std::size_t dropped_assets = 0;  // member-days lost to missing returns
};

// Builds the series for one quintile: members are the assets quintile_sort
// puts in bucket q each date, equal-weighted; members with a missing return
// are dropped that day with renormalization (counted). Daily turnover
// compares the new target book against the previous book drifted by realized
// returns: w~_i = w_i(1+r_i) / sum_j w_j(1+r_j), turnover = 1/2 sum |w - w~|
// over the union of holdings. A gross return <= 0 raises NumericError.
PortfolioSeries portfolio_returns(const ForecastPanel& panel, int quintile);

double mean_turnover(const PortfolioSeries& s);

// Trailing mean of the drift turnover series over `window` entries; output
// length is turnover count - window + 1.
std::vector<double> rolling_turnover(const PortfolioSeries& s,
                                     std::size_t window);

// ============================================================================
// Performance summary
// ============================================================================

struct PerfSummary {
  double ann_return = 0.0;    // mean daily x periods_per_year
  double ann_vol = 0.0;       // sample std daily x sqrt(periods_per_year)
  double sharpe = 0.0;        // ann_return / ann_vol, zero risk-free
  double max_drawdown = 0.0;  // min of wealth / running max - 1, in [-1, 0]
  double mean_turnover = 0.0;
};

PerfSummary perf_summary(const PortfolioSeries& s,
                         double periods_per_year = 252.0);

// ============================================================================
// Sharpe-turnover frontier
// ============================================================================

struct FrontierRow {
  std::string model;
  int quintile = 0;  // 1-based label (Q1..Q5)
  double sharpe = 0.0;
  double mean_turnover = 0.0;
  double ann_return = 0.0;
  double ann_vol = 0.0;
};

// One row per (model, quintile), sorted by mean turnover (ties by model name
// then quintile). All panels must share the same rebalance calendar.
std::vector<FrontierRow> frontier(
    const std::vector<std::pair<std::string, const ForecastPanel*>>& models,
    const std::vector<int>& quintiles);

}  // namespace vollab
