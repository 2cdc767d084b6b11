#include "vollab/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "vollab/csv.hpp"
#include "vollab/rng.hpp"

namespace vollab {

// ============================================================================
// Dates (proleptic Gregorian day counts, days since 1970-01-01)
// ============================================================================

namespace {

std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yy + (m <= 2));
}

}  // namespace

std::int64_t parse_date(const std::string& s) {
  if (s.find('-') != std::string::npos) {
    int y, m, d;
    if (std::sscanf(s.c_str(), "%d-%d-%d", &y, &m, &d) != 3)
      throw SchemaError("unparseable date '" + s + "'");
    return days_from_civil(y, m, d);
  }
  try {
    return std::stoll(s);
  } catch (const std::exception&) {
    throw SchemaError("unparseable date '" + s + "'");
  }
}

std::string date_to_iso(std::int64_t ordinal) {
  int y, m, d;
  civil_from_days(ordinal, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
  return buf;
}

// ============================================================================
// Bars
// ============================================================================

bool bar_valid(const OhlcBar& b) {
  if (!(b.open > 0 && b.high > 0 && b.low > 0 && b.close > 0)) return false;
  if (!(is_finite(b.open) && is_finite(b.high) && is_finite(b.low) &&
        is_finite(b.close) && is_finite(b.ret)))
    return false;
  if (b.high < std::max(b.open, b.close)) return false;
  if (b.low > std::min(b.open, b.close)) return false;
  return b.high >= b.low;
}

double garman_klass_raw(const OhlcBar& b) {
  if (!(b.open > 0 && b.high > 0 && b.low > 0 && b.close > 0))
    throw NumericError("garman-klass on nonpositive price");
  const double hl = std::log(b.high / b.low);
  const double co = std::log(b.close / b.open);
  return 0.5 * hl * hl - (2.0 * std::log(2.0) - 1.0) * co * co;
}

double garman_klass(const OhlcBar& b, double floor_var) {
  return std::max(garman_klass_raw(b), floor_var);
}

// ============================================================================
// Loading
// ============================================================================

namespace {

double parse_num(const std::string& s, bool& ok) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    ok = pos == s.size();
    return v;
  } catch (const std::exception&) {
    ok = false;
    return 0.0;
  }
}

}  // namespace

Panel load_panel(const std::string& path, const CsvSchema& schema) {
  CsvTable t = read_csv(path);
  const std::size_t ci_asset = t.col(schema.asset);
  const std::size_t ci_date = t.col(schema.date);
  const std::size_t ci_open = t.col(schema.open);
  const std::size_t ci_high = t.col(schema.high);
  const std::size_t ci_low = t.col(schema.low);
  const std::size_t ci_close = t.col(schema.close);
  const std::size_t ci_ret = t.col(schema.ret);

  std::map<std::string, std::vector<OhlcBar>> by_asset;
  std::size_t dropped = 0;
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) {
      ++dropped;
      continue;
    }
    bool ok = true, cell_ok = true;
    OhlcBar b;
    try {
      b.date = parse_date(row[ci_date]);
    } catch (const SchemaError&) {
      ok = false;
    }
    b.open = parse_num(row[ci_open], cell_ok); ok = ok && cell_ok;
    b.high = parse_num(row[ci_high], cell_ok); ok = ok && cell_ok;
    b.low = parse_num(row[ci_low], cell_ok); ok = ok && cell_ok;
    b.close = parse_num(row[ci_close], cell_ok); ok = ok && cell_ok;
    b.ret = parse_num(row[ci_ret], cell_ok); ok = ok && cell_ok;
    if (!ok || !bar_valid(b)) {
      ++dropped;
      continue;
    }
    by_asset[row[ci_asset]].push_back(b);
  }

  Panel p;
  std::set<std::int64_t> dates;
  for (auto& [id, bars] : by_asset) {
    std::stable_sort(bars.begin(), bars.end(),
                     [](const OhlcBar& a, const OhlcBar& b) { return a.date < b.date; });
    std::vector<OhlcBar> dedup;
    for (const auto& b : bars) {
      if (!dedup.empty() && dedup.back().date == b.date) {
        ++dropped;  // duplicate date within asset
        continue;
      }
      dedup.push_back(b);
      dates.insert(b.date);
    }
    if (!dedup.empty()) {
      p.asset_ids.push_back(id);
      p.bars.push_back(std::move(dedup));
    }
  }
  p.calendar.assign(dates.begin(), dates.end());
  p.dropped_rows = dropped;
  if (p.asset_ids.empty()) throw SchemaError("empty panel: no valid rows in " + path);
  return p;
}

// ============================================================================
// Synthesis
// ============================================================================

Panel synth_panel(std::size_t n_assets, std::size_t n_days,
                  const SynthParams& prm, std::uint64_t seed) {
  if (n_assets < 1) throw ConfigError("synth: n_assets must be >= 1");
  if (n_days < 2) throw ConfigError("synth: n_days must be >= 2");
  if (!(prm.persistence >= 0.0 && prm.persistence < 1.0))
    throw ConfigError("synth: persistence must lie in [0, 1) for stationarity");
  if (prm.intraday_steps < 2) throw ConfigError("synth: intraday_steps must be >= 2");

  const double phi = prm.persistence;
  const double stat_sd = prm.shock / std::sqrt(1.0 - phi * phi);

  Panel p;
  p.calendar.resize(n_days);
  for (std::size_t t = 0; t < n_days; ++t)
    p.calendar[t] = prm.start_date + static_cast<std::int64_t>(t);

  char name[24];
  for (std::size_t a = 0; a < n_assets; ++a) {
    // One independent substream per asset: panels grown by adding assets
    // keep earlier assets bit-identical.
    Rng rng(seed, a + 1);
    std::snprintf(name, sizeof(name), "A%04zu", a);
    p.asset_ids.emplace_back(name);

    std::vector<OhlcBar> bars(n_days);
    double lv = prm.base_log_var + stat_sd * rng.normal();
    double log_close = std::log(100.0);
    for (std::size_t t = 0; t < n_days; ++t) {
      if (t > 0)
        lv = prm.base_log_var + phi * (lv - prm.base_log_var) +
             prm.shock * rng.normal();
      const double step_sd =
          std::exp(lv / 2.0) / std::sqrt(double(prm.intraday_steps));

      // Intraday random walk in log-price; extremes become high/low so the
      // bar invariants hold by construction.
      double lp = log_close;  // open = previous close (no overnight gap)
      double hi = lp, lo = lp;
      const double open = std::exp(lp);
      for (int k = 0; k < prm.intraday_steps; ++k) {
        lp += step_sd * rng.normal();
        hi = std::max(hi, lp);
        lo = std::min(lo, lp);
      }
      OhlcBar& b = bars[t];
      b.date = p.calendar[t];
      b.open = open;
      b.high = std::exp(hi);
      b.low = std::exp(lo);
      b.close = std::exp(lp);
      b.ret = b.close / std::exp(log_close) - 1.0;
      if (t == 0) b.ret = b.close / b.open - 1.0;
      log_close = lp;
    }
    p.bars.push_back(std::move(bars));
  }
  return p;
}

// ============================================================================
// Targets
// ============================================================================

TargetSeries build_targets(const Panel& panel, double annualization,
                           double floor_var) {
  TargetSeries out;
  out.values.resize(panel.n_assets());
  for (std::size_t a = 0; a < panel.n_assets(); ++a) {
    out.values[a].reserve(panel.bars[a].size());
    for (const auto& b : panel.bars[a])
      out.values[a].push_back(
          std::log(annualization * garman_klass(b, floor_var)));
  }
  return out;
}

// ============================================================================
// Preprocessing
// ============================================================================

double quantile_linear(std::vector<double> values, double p) {
  if (values.empty()) throw NumericError("quantile of empty sample");
  std::sort(values.begin(), values.end());
  if (p <= 0.0) return values.front();
  if (p >= 1.0) return values.back();
  const double h = p * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

SplitBounds chrono_split(const std::vector<std::int64_t>& calendar) {
  const std::size_t n = calendar.size();
  if (n < 5) throw ConfigError("calendar too short for a 3:1:1 split");
  const std::size_t t = n * 3 / 5;
  const std::size_t v = n * 4 / 5;
  SplitBounds b;
  b.train_end = calendar[t];
  b.val_end = calendar[v];
  b.n_train_dates = t;
  b.n_val_dates = v - t;
  b.n_test_dates = n - v;
  return b;
}

PreprocessStats fit_preprocess(const Panel& panel, const TargetSeries& targets,
                               std::int64_t train_end, double q_low,
                               double q_high) {
  if (!(q_low <= q_high)) throw ConfigError("quantile pair out of order");
  PreprocessStats s;
  const std::size_t na = panel.n_assets();
  s.q_lo.resize(na);
  s.q_hi.resize(na);

  std::vector<double> winsorized_all;
  for (std::size_t a = 0; a < na; ++a) {
    std::vector<double> train_vals;
    for (std::size_t i = 0; i < panel.bars[a].size(); ++i)
      if (panel.bars[a][i].date < train_end)
        train_vals.push_back(targets.values[a][i]);
    std::set<double> distinct(train_vals.begin(), train_vals.end());
    if (distinct.size() < 2)
      throw NumericError("fit_preprocess: asset " + panel.asset_ids[a] +
                         " has fewer than 2 distinct training values");
    s.q_lo[a] = quantile_linear(train_vals, q_low);
    s.q_hi[a] = quantile_linear(train_vals, q_high);
    for (double x : train_vals)
      winsorized_all.push_back(std::clamp(x, s.q_lo[a], s.q_hi[a]));
  }

  double sum = 0.0;
  for (double x : winsorized_all) sum += x;
  const double n = static_cast<double>(winsorized_all.size());
  s.mu = sum / n;
  double ss = 0.0;
  for (double x : winsorized_all) ss += sq(x - s.mu);
  s.sigma = std::sqrt(ss / n);  // population convention
  if (!(s.sigma > 0.0))
    throw NumericError("fit_preprocess: zero variance in training targets");
  return s;
}

double apply_preprocess_one(double x, const PreprocessStats& s,
                            std::size_t asset) {
  const double clamped = std::clamp(x, s.q_lo[asset], s.q_hi[asset]);
  return (clamped - s.mu) / s.sigma;
}

TargetSeries apply_preprocess(const TargetSeries& targets,
                              const PreprocessStats& s) {
  TargetSeries out;
  out.values.resize(targets.values.size());
  for (std::size_t a = 0; a < targets.values.size(); ++a) {
    out.values[a].reserve(targets.values[a].size());
    for (double x : targets.values[a])
      out.values[a].push_back(apply_preprocess_one(x, s, a));
  }
  return out;
}

// ============================================================================
// Windowing
// ============================================================================

std::vector<std::size_t> WindowedDataset::rows_of(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == static_cast<std::uint8_t>(s)) out.push_back(i);
  return out;
}

std::size_t WindowedDataset::count_of(Split s) const {
  std::size_t c = 0;
  for (auto v : split) c += v == static_cast<std::uint8_t>(s);
  return c;
}

WindowedDataset split_and_window(const Panel& panel,
                                 const TargetSeries& standardized,
                                 const PreprocessStats& stats, std::size_t L,
                                 int max_gap) {
  if (L < 1) throw ConfigError("window length must be >= 1");
  const SplitBounds bounds = chrono_split(panel.calendar);

  // Trading-day gaps are measured in positions on the global calendar.
  std::unordered_map<std::int64_t, std::size_t> cal_idx;
  cal_idx.reserve(panel.calendar.size());
  for (std::size_t i = 0; i < panel.calendar.size(); ++i)
    cal_idx[panel.calendar[i]] = i;

  WindowedDataset ds;
  ds.L = L;
  ds.asset_ids = panel.asset_ids;
  ds.stats = stats;
  ds.bounds = bounds;

  std::vector<double> xbuf;
  std::vector<double> ybuf;
  for (std::size_t a = 0; a < panel.n_assets(); ++a) {
    const auto& bars = panel.bars[a];
    const auto& vals = standardized.values[a];
    if (bars.size() < L + 2) {
      ++ds.skipped_assets;
      continue;
    }
    // Precompute gap flags between consecutive bars.
    std::vector<bool> big_gap(bars.size(), false);
    for (std::size_t i = 1; i < bars.size(); ++i) {
      const std::size_t gap = cal_idx.at(bars[i].date) - cal_idx.at(bars[i - 1].date);
      big_gap[i] = gap > static_cast<std::size_t>(max_gap);
    }
    for (std::size_t start = 0; start + L < bars.size(); ++start) {
      const std::size_t tgt = start + L;
      bool straddles = false;
      for (std::size_t i = start + 1; i <= tgt && !straddles; ++i)
        straddles = big_gap[i];
      if (straddles) continue;
      for (std::size_t i = start; i < tgt; ++i) xbuf.push_back(vals[i]);
      ybuf.push_back(vals[tgt]);
      ds.asset.push_back(static_cast<std::uint32_t>(a));
      ds.target_date.push_back(bars[tgt].date);
      const std::int64_t td = bars[tgt].date;
      Split s = td < bounds.train_end ? Split::train
                : td < bounds.val_end ? Split::val
                                      : Split::test;
      ds.split.push_back(static_cast<std::uint8_t>(s));
    }
  }
  const std::size_t n = ybuf.size();
  ds.X = Tensor({n, L}, std::move(xbuf));
  ds.y = std::move(ybuf);
  return ds;
}

WindowedDataset build_dataset(const Panel& panel, const IngestConfig& cfg) {
  const TargetSeries raw =
      build_targets(panel, cfg.annualization, cfg.var_floor);
  const SplitBounds bounds = chrono_split(panel.calendar);
  const PreprocessStats stats =
      fit_preprocess(panel, raw, bounds.train_end, cfg.q_low, cfg.q_high);
  const TargetSeries standardized = apply_preprocess(raw, stats);
  return split_and_window(panel, standardized, stats, cfg.L, cfg.max_gap);
}

}  // namespace vollab
