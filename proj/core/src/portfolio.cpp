#include "vollab/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "vollab/common.hpp"

namespace vollab {

// ============================================================================
// Quintile assignment
// ============================================================================

std::vector<int> quintile_sort(const std::vector<std::int64_t>& asset_ids,
                               const std::vector<double>& forecasts) {
  const std::size_t n = asset_ids.size();
  if (forecasts.size() != n)
    throw ShapeError("quintile_sort: id/forecast length mismatch");
  if (n < static_cast<std::size_t>(kQuintiles))
    throw ConfigError("quintile_sort: need at least 5 assets");
  for (double f : forecasts)
    if (!std::isfinite(f))
      throw NumericError("quintile_sort: non-finite forecast");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (forecasts[a] != forecasts[b]) return forecasts[a] < forecasts[b];
    return asset_ids[a] < asset_ids[b];
  });

  // n/5 per bucket; the remainder tops up the lower (low-volatility) buckets.
  const std::size_t base = n / kQuintiles;
  const std::size_t rem = n % kQuintiles;
  std::vector<int> bucket(n);
  std::size_t pos = 0;
  for (int q = 0; q < kQuintiles; ++q) {
    const std::size_t size = base + (static_cast<std::size_t>(q) < rem ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) bucket[idx[pos++]] = q;
  }
  return bucket;
}

// ============================================================================
// Portfolio series
// ============================================================================

PortfolioSeries portfolio_returns(const ForecastPanel& panel, int quintile) {
  if (quintile < 0 || quintile >= kQuintiles)
    throw ConfigError("portfolio_returns: quintile must be in 0..4");

  PortfolioSeries s;
  // Previous book, drifted to just before the current rebalance.
  std::map<std::int64_t, double> prev_target;
  std::map<std::int64_t, double> prev_drifted;
  bool have_prev = false;

  for (const ForecastDay& day : panel.days) {
    if (day.assets.size() < static_cast<std::size_t>(kQuintiles)) {
      throw ConfigError("portfolio_returns: date with fewer than 5 assets "
                        "(filter the panel first)");
    }
    const std::vector<int> bucket = quintile_sort(day.assets, day.forecast);

    std::vector<std::int64_t> members;
    std::vector<double> rets;
    for (std::size_t i = 0; i < day.assets.size(); ++i) {
      if (bucket[i] != quintile) continue;
      if (std::isnan(day.next_ret[i])) {
        s.dropped_assets += 1;  // missing return: drop and renormalize
        continue;
      }
      members.push_back(day.assets[i]);
      rets.push_back(day.next_ret[i]);
    }
    if (members.empty())
      throw NumericError("portfolio_returns: quintile emptied by drops");

    const double w = 1.0 / static_cast<double>(members.size());
    std::map<std::int64_t, double> target;
    for (std::int64_t a : members) target[a] = w;

    if (have_prev) {
      // Union of old and new holdings; absent side contributes weight 0.
      double drift_sum = 0.0, tgt_sum = 0.0;
      for (std::int64_t a : members) {
        auto it = prev_drifted.find(a);
        const double wd = it == prev_drifted.end() ? 0.0 : it->second;
        drift_sum += std::fabs(w - wd);
        auto jt = prev_target.find(a);
        tgt_sum += std::fabs(w - (jt == prev_target.end() ? 0.0 : jt->second));
      }
      for (const auto& [a, wd] : prev_drifted)
        if (!target.count(a)) drift_sum += wd;
      for (const auto& [a, wt] : prev_target)
        if (!target.count(a)) tgt_sum += wt;
      s.turnover_drift.push_back(0.5 * drift_sum);
      s.turnover_target.push_back(0.5 * tgt_sum);
    }

    double port_ret = 0.0;
    for (double r : rets) port_ret += r;
    port_ret *= w;

    s.dates.push_back(day.date);
    s.held.push_back(members);
    {
      std::vector<double> wv(members.size(), w);
      s.weights.push_back(std::move(wv));
    }
    s.ret.push_back(port_ret);

    // Drift this book forward for the next rebalance.
    double gross = 0.0;
    for (double r : rets) gross += w * (1.0 + r);
    if (!(gross > 0.0))
      throw NumericError("portfolio_returns: gross return <= -100% "
                         "(degenerate day)");
    prev_target = target;
    prev_drifted.clear();
    for (std::size_t i = 0; i < members.size(); ++i)
      prev_drifted[members[i]] = w * (1.0 + rets[i]) / gross;
    have_prev = true;
  }
  return s;
}

double mean_turnover(const PortfolioSeries& s) {
  if (s.dates.size() < 2)
    throw ConfigError("turnover: need at least 2 rebalance dates");
  double acc = 0.0;
  for (double t : s.turnover_drift) acc += t;
  return acc / static_cast<double>(s.turnover_drift.size());
}

std::vector<double> rolling_turnover(const PortfolioSeries& s,
                                     std::size_t window) {
  if (window == 0) throw ConfigError("rolling turnover: window must be >= 1");
  const std::vector<double>& t = s.turnover_drift;
  if (t.size() < window)
    throw ConfigError("rolling turnover: series shorter than window");
  std::vector<double> out;
  out.reserve(t.size() - window + 1);
  double acc = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    acc += t[i];
    if (i + 1 >= window) {
      out.push_back(acc / static_cast<double>(window));
      acc -= t[i + 1 - window];
    }
  }
  return out;
}

// ============================================================================
// Performance summary
// ============================================================================

PerfSummary perf_summary(const PortfolioSeries& s, double periods_per_year) {
  if (s.ret.size() < 2)
    throw ConfigError("perf_summary: need at least 2 returns");
  if (!(periods_per_year > 0.0))
    throw ConfigError("perf_summary: periods_per_year must be positive");

  const double n = static_cast<double>(s.ret.size());
  double mean = 0.0;
  for (double r : s.ret) mean += r;
  mean /= n;
  double ss = 0.0;
  for (double r : s.ret) ss += sq(r - mean);
  const double sd = std::sqrt(ss / (n - 1.0));

  PerfSummary p;
  p.ann_return = mean * periods_per_year;
  p.ann_vol = sd * std::sqrt(periods_per_year);
  if (p.ann_vol == 0.0)
    throw NumericError("perf_summary: zero volatility, Sharpe undefined");
  p.sharpe = p.ann_return / p.ann_vol;

  double wealth = 1.0, peak = 1.0, dd = 0.0;
  for (double r : s.ret) {
    wealth *= 1.0 + r;
    peak = std::max(peak, wealth);
    dd = std::min(dd, wealth / peak - 1.0);
  }
  p.max_drawdown = dd;
  p.mean_turnover = s.dates.size() >= 2 ? mean_turnover(s) : 0.0;
  return p;
}

// ============================================================================
// Frontier
// ============================================================================

std::vector<FrontierRow> frontier(
    const std::vector<std::pair<std::string, const ForecastPanel*>>& models,
    const std::vector<int>& quintiles) {
  if (models.empty()) throw ConfigError("frontier: no models");
  if (quintiles.empty()) throw ConfigError("frontier: no quintiles");
  for (const auto& [name, panel] : models) {
    if (panel->days.size() != models.front().second->days.size())
      throw ShapeError("frontier: panels disagree on calendar length");
    for (std::size_t i = 0; i < panel->days.size(); ++i)
      if (panel->days[i].date != models.front().second->days[i].date)
        throw ShapeError("frontier: panels disagree on rebalance dates");
  }

  std::vector<FrontierRow> rows;
  for (const auto& [name, panel] : models) {
    for (int q : quintiles) {
      if (q < 1 || q > kQuintiles)
        throw ConfigError("frontier: quintile labels are 1..5");
      const PortfolioSeries s = portfolio_returns(*panel, q - 1);
      const PerfSummary p = perf_summary(s);
      FrontierRow row;
      row.model = name;
      row.quintile = q;
      row.sharpe = p.sharpe;
      row.mean_turnover = p.mean_turnover;
      row.ann_return = p.ann_return;
      row.ann_vol = p.ann_vol;
      rows.push_back(std::move(row));
    }
  }
  std::sort(rows.begin(), rows.end(), [](const FrontierRow& a,
                                         const FrontierRow& b) {
    if (a.mean_turnover != b.mean_turnover)
      return a.mean_turnover < b.mean_turnover;
    if (a.model != b.model) return a.model < b.model;
    return a.quintile < b.quintile;
  });
  return rows;
}

}  // namespace vollab
