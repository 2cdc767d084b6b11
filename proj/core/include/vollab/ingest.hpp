#pragma once
// Panel ingestion: load or synthesize daily OHLC bars, turn ranges into
// annualized log-variance targets, winsorize + standardize with
// training-set statistics only, and cut sliding windows with chronological
// split labels.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vollab/tensor.hpp"

namespace vollab {

// ============================================================================
// Panel types
// ============================================================================

struct OhlcBar {
  std::int64_t date = 0;  // calendar-day ordinal (days since 1970-01-01)
  double open = 0, high = 0, low = 0, close = 0;
  double ret = 0;  // simple daily return
};

// High must bracket open/close from above, low from below, prices positive.
bool bar_valid(const OhlcBar& b);

struct Panel {
  std::vector<std::string> asset_ids;            // sorted, unique
  std::vector<std::vector<OhlcBar>> bars;        // parallel to asset_ids;
                                                 // strictly increasing dates
  std::vector<std::int64_t> calendar;            // sorted union of all dates
  std::size_t dropped_rows = 0;                  // invalid rows seen on load

  std::size_t n_assets() const { return asset_ids.size(); }
};

// Calendar-day ordinal <-> ISO-8601 date string.
std::int64_t parse_date(const std::string& iso_or_ordinal);
std::string date_to_iso(std::int64_t ordinal);

// ============================================================================
// Loading and synthesis
// ============================================================================

struct CsvSchema {
  std::string asset = "permno";
  std::string date = "date";
  std::string open = "open";
  std::string high = "high";
  std::string low = "low";
  std::string close = "close";
  std::string ret = "ret";
};

// Reads a bar CSV; rows violating the OhlcBar invariants (or duplicating a
// date within an asset) are dropped and counted in Panel::dropped_rows.
Panel load_panel(const std::string& path, const CsvSchema& schema = {});

struct SynthParams {
  double persistence = 0.9;   // AR(1) coefficient of daily log-variance
  double shock = 0.4;         // innovation stddev of daily log-variance
  double base_log_var = -9.2; // long-run mean log-variance (~1% daily vol)
  int intraday_steps = 16;    // random-walk increments forming each bar
  std::int64_t start_date = 10959;  // 2000-01-03
};

// Volatility-clustered panel: per-asset AR(1) log-variance drives an intraday
// random walk whose extremes become the bar. Deterministic per (seed, asset).
Panel synth_panel(std::size_t n_assets, std::size_t n_days,
                  const SynthParams& p, std::uint64_t seed);

// ============================================================================
// Targets
// ============================================================================

// Floor applied to the range-based variance before logs; keeps zero-range
// bars finite in log space.
inline constexpr double kVarFloor = 1e-12;

// Range-based daily variance proxy:
//   1/2 (ln H/L)^2 - (2 ln 2 - 1) (ln C/O)^2
// Raw value; can be slightly negative for extreme close-to-open moves.
double garman_klass_raw(const OhlcBar& b);

// Floored variant used by the target pipeline.
double garman_klass(const OhlcBar& b, double floor_var = kVarFloor);

// Per-asset series aligned with Panel::bars.
struct TargetSeries {
  std::vector<std::vector<double>> values;  // [asset][bar index]
};

// ln(annualization * max(variance, floor)) per bar.
TargetSeries build_targets(const Panel& panel, double annualization = 252.0,
                           double floor_var = kVarFloor);

// ============================================================================
// Preprocessing
// ============================================================================

struct PreprocessStats {
  std::vector<double> q_lo, q_hi;  // per-asset winsorization bounds
  double mu = 0.0;                 // global training mean (post-winsorize)
  double sigma = 1.0;              // global training stddev (population)
};

// Linear-interpolation empirical quantile between order statistics:
// h = p*(n-1), result = v[floor(h)] + frac(h)*(v[floor(h)+1] - v[floor(h)]).
double quantile_linear(std::vector<double> values, double p);

// Chronological 3:1:1 partition of the calendar: the first floor(3n/5) dates
// are train, the next floor(4n/5)-floor(3n/5) are validation, the rest test.
struct SplitBounds {
  std::int64_t train_end = 0;  // first validation date (exclusive train bound)
  std::int64_t val_end = 0;    // first test date (exclusive validation bound)
  std::size_t n_train_dates = 0, n_val_dates = 0, n_test_dates = 0;
};
SplitBounds chrono_split(const std::vector<std::int64_t>& calendar);

// Fits per-asset winsorization quantiles and the global mean/stddev on
// training rows only (bars dated strictly before train_end).
PreprocessStats fit_preprocess(const Panel& panel, const TargetSeries& targets,
                               std::int64_t train_end, double q_low = 0.005,
                               double q_high = 0.995);

// clamp to the asset's winsorization band, then global z-score.
double apply_preprocess_one(double x, const PreprocessStats& s,
                            std::size_t asset);
TargetSeries apply_preprocess(const TargetSeries& targets,
                              const PreprocessStats& s);

// ============================================================================
// Windowing
// ============================================================================

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };

struct WindowedDataset {
  std::size_t L = 100;
  Tensor X;                                // (n, L) standardized inputs
  std::vector<double> y;                   // standardized next-day targets
  std::vector<std::uint8_t> split;         // Split per row
  std::vector<std::uint32_t> asset;        // row -> asset index
  std::vector<std::int64_t> target_date;   // row -> target calendar date
  std::vector<std::string> asset_ids;      // copied from the panel
  PreprocessStats stats;
  SplitBounds bounds;
  std::size_t skipped_assets = 0;          // too short to window

  std::size_t n_rows() const { return y.size(); }
  std::vector<std::size_t> rows_of(Split s) const;
  std::size_t count_of(Split s) const;
};

// Sliding L-day windows with next-day targets over standardized series.
// A row is labeled by the chronological split containing its target date;
// windows never cross assets and never straddle a calendar gap of more than
// max_gap trading days between consecutive bars.
WindowedDataset split_and_window(const Panel& panel,
                                 const TargetSeries& standardized,
                                 const PreprocessStats& stats,
                                 std::size_t L = 100, int max_gap = 10);

// ============================================================================
// One-call pipeline
// ============================================================================

struct IngestConfig {
  std::size_t L = 100;
  int max_gap = 10;
  double q_low = 0.005, q_high = 0.995;
  double var_floor = kVarFloor;
  double annualization = 252.0;
};

// build_targets -> chrono_split -> fit_preprocess -> apply -> window.
WindowedDataset build_dataset(const Panel& panel, const IngestConfig& cfg);

}  // namespace vollab
