#include "vollab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vollab/common.hpp"
#include "vollab/train.hpp"

namespace vollab {

// ============================================================================
// Predictors
// ============================================================================

double Predictor::predict_one(const double* x) const {
  double out;
  predict(x, 1, &out);
  return out;
}

std::size_t ModelPredictor::input_len() const {
  return static_cast<std::size_t>(p_->cfg.L);
}

void ModelPredictor::predict(const double* X, std::size_t n,
                             double* out) const {
  vollab::predict(*p_, X, n, out);
}

void LinearPredictor::predict(const double* X, std::size_t n,
                              double* out) const {
  for (std::size_t i = 0; i < n; ++i)
    out[i] = m_->predict_one(X + i * m_->w.size());
}

EnsemblePredictor::EnsemblePredictor(std::vector<const Predictor*> members)
    : members_(std::move(members)) {
  if (members_.empty()) throw ConfigError("ensemble: no members");
  for (const Predictor* m : members_)
    if (m->input_len() != members_.front()->input_len())
      throw ShapeError("ensemble: members disagree on input length");
}

std::size_t EnsemblePredictor::input_len() const {
  return members_.front()->input_len();
}

void EnsemblePredictor::predict(const double* X, std::size_t n,
                                double* out) const {
  std::fill(out, out + n, 0.0);
  std::vector<double> tmp(n);
  for (const Predictor* m : members_) {
    m->predict(X, n, tmp.data());
    for (std::size_t i = 0; i < n; ++i) out[i] += tmp[i];
  }
  const double inv = 1.0 / static_cast<double>(members_.size());
  for (std::size_t i = 0; i < n; ++i) out[i] *= inv;
}

// ============================================================================
// Impulse responses and surfaces
// ============================================================================

std::vector<double> delta_grid(double lo, double hi, std::size_t n) {
  if (n < 2) throw ConfigError("delta_grid: need at least 2 points");
  if (!(hi > lo)) throw ConfigError("delta_grid: need hi > lo");
  std::vector<double> g(n);
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + step * static_cast<double>(i);
  g.back() = hi;  // land exactly on the endpoint
  return g;
}

std::vector<double> impulse_response(const Predictor& f, std::size_t k,
                                     const std::vector<double>& deltas) {
  const std::size_t L = f.input_len();
  if (k >= L) throw ConfigError("impulse_response: lag out of range");
  if (deltas.empty()) throw ConfigError("impulse_response: empty shock grid");

  std::vector<double> X(deltas.size() * L, 0.0);
  for (std::size_t j = 0; j < deltas.size(); ++j) X[j * L + k] = deltas[j];
  std::vector<double> out(deltas.size());
  f.predict(X.data(), deltas.size(), out.data());
  return out;
}

ResponseSurface response_surface(const Predictor& f,
                                 const std::vector<std::size_t>& lags,
                                 const std::vector<double>& deltas) {
  if (lags.empty()) throw ConfigError("response_surface: empty lag grid");
  ResponseSurface s;
  s.lags = lags;
  s.deltas = deltas;
  s.R.reserve(lags.size() * deltas.size());
  for (std::size_t k : lags) {
    const std::vector<double> row = impulse_response(f, k, deltas);
    s.R.insert(s.R.end(), row.begin(), row.end());
  }
  return s;
}

ResponseSurface response_surface(const Predictor& f,
                                 const std::vector<double>& deltas) {
  std::vector<std::size_t> lags(f.input_len());
  std::iota(lags.begin(), lags.end(), std::size_t{0});
  return response_surface(f, lags, deltas);
}

DifferenceSurface difference_surface(const ResponseSurface& A,
                                     const ResponseSurface& B) {
  if (A.lags != B.lags || A.deltas != B.deltas)
    throw ShapeError("difference_surface: probe grids do not match");

  DifferenceSurface d;
  d.lags = A.lags;
  d.deltas = A.deltas;
  d.D.resize(A.R.size());
  for (std::size_t i = 0; i < A.R.size(); ++i) d.D[i] = A.R[i] - B.R[i];

  // Per-lag least-squares affine fit in the shock; the score is the worst
  // residual anywhere on the grid.
  const std::size_t nd = d.deltas.size();
  double db = 0.0;
  for (double v : d.deltas) db += v;
  db /= static_cast<double>(nd);
  double sdd = 0.0;
  for (double v : d.deltas) sdd += sq(v - db);

  for (std::size_t ki = 0; ki < d.lags.size(); ++ki) {
    const double* row = d.D.data() + ki * nd;
    double yb = 0.0;
    for (std::size_t j = 0; j < nd; ++j) yb += row[j];
    yb /= static_cast<double>(nd);
    double sdy = 0.0;
    for (std::size_t j = 0; j < nd; ++j) sdy += (d.deltas[j] - db) * (row[j] - yb);
    const double slope = sdd > 0.0 ? sdy / sdd : 0.0;
    const double icpt = yb - slope * db;
    for (std::size_t j = 0; j < nd; ++j)
      d.planarity = std::max(
          d.planarity, std::fabs(row[j] - (icpt + slope * d.deltas[j])));
  }
  return d;
}

// ============================================================================
// Shapley attribution
// ============================================================================

namespace {

// Walks one feature ordering: row i of the batch reveals the first i features
// of x over the background; consecutive output differences credit each
// revealed feature. Adds each feature's increment into phi and its square
// into phi_sq (for standard errors).
void shapley_walk(const Predictor& f, const double* x, const double* background,
                  const std::vector<std::size_t>& order,
                  std::vector<double>& batch, std::vector<double>& vals,
                  std::vector<double>& phi, std::vector<double>* phi_sq) {
  const std::size_t L = f.input_len();
  double* row = batch.data();
  std::copy(background, background + L, row);
  for (std::size_t i = 0; i < L; ++i) {
    std::copy(row, row + L, row + L);
    row += L;
    row[order[i]] = x[order[i]];
  }
  f.predict(batch.data(), L + 1, vals.data());
  for (std::size_t i = 0; i < L; ++i) {
    const double inc = vals[i + 1] - vals[i];
    phi[order[i]] += inc;
    if (phi_sq) (*phi_sq)[order[i]] += inc * inc;
  }
}

}  // namespace

void shapley_row(const Predictor& f, const double* x, const double* background,
                 std::size_t n_perm, Rng& rng, std::vector<double>& phi,
                 std::vector<double>& se) {
  if (n_perm == 0) throw ConfigError("shapley: n_perm must be >= 1");
  const std::size_t L = f.input_len();
  phi.assign(L, 0.0);
  se.assign(L, 0.0);
  std::vector<double> phi_sq(L, 0.0);

  std::vector<std::size_t> order(L);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> batch((L + 1) * L), vals(L + 1);

  for (std::size_t p = 0; p < n_perm; ++p) {
    rng.shuffle(order);
    shapley_walk(f, x, background, order, batch, vals, phi, &phi_sq);
  }

  const double n = static_cast<double>(n_perm);
  for (std::size_t k = 0; k < L; ++k) {
    phi[k] /= n;
    if (n_perm > 1) {
      const double var =
          std::max(0.0, (phi_sq[k] - n * phi[k] * phi[k]) / (n - 1.0));
      se[k] = std::sqrt(var / n);
    }
  }
}

void shapley_row_exact(const Predictor& f, const double* x,
                       const double* background, std::vector<double>& phi) {
  const std::size_t L = f.input_len();
  if (L > 8)
    throw ConfigError("shapley exact: enumeration limited to L <= 8 lags");
  phi.assign(L, 0.0);

  std::vector<std::size_t> order(L);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> batch((L + 1) * L), vals(L + 1);

  std::size_t count = 0;
  do {
    shapley_walk(f, x, background, order, batch, vals, phi, nullptr);
    count += 1;
  } while (std::next_permutation(order.begin(), order.end()));
  for (double& v : phi) v /= static_cast<double>(count);
}

AttributionReport shapley_attribution(const Predictor& f, const double* X,
                                      std::size_t n_rows, std::size_t n_perm,
                                      std::uint64_t seed, bool exact) {
  if (n_rows == 0) throw ConfigError("shapley: empty evaluation sample");
  const std::size_t L = f.input_len();
  const std::vector<double> background(L, 0.0);

  AttributionReport rep;
  rep.n_rows = n_rows;
  rep.n_perm = exact ? 0 : n_perm;
  rep.exact = exact;
  rep.mean_abs_phi.assign(L, 0.0);
  rep.stderr_phi.assign(L, 0.0);
  std::vector<double> sum_sq(L, 0.0);

  std::vector<double> phi, se;
  for (std::size_t r = 0; r < n_rows; ++r) {
    const double* x = X + r * L;
    if (exact) {
      shapley_row_exact(f, x, background.data(), phi);
    } else {
      Rng rng(seed, static_cast<std::uint64_t>(r) + 1);
      shapley_row(f, x, background.data(), n_perm, rng, phi, se);
    }
    for (std::size_t k = 0; k < L; ++k) {
      const double a = std::fabs(phi[k]);
      rep.mean_abs_phi[k] += a;
      sum_sq[k] += a * a;
    }
  }

  const double n = static_cast<double>(n_rows);
  for (std::size_t k = 0; k < L; ++k) {
    rep.mean_abs_phi[k] /= n;
    if (n_rows > 1) {
      const double var = std::max(
          0.0, (sum_sq[k] - n * sq(rep.mean_abs_phi[k])) / (n - 1.0));
      rep.stderr_phi[k] = std::sqrt(var / n);
    }
  }
  return rep;
}

// ============================================================================
// Ensembles
// ============================================================================

EnsembleReport ensemble_report(
    const std::vector<std::vector<double>>& member_preds,
    const std::vector<double>& y, const std::vector<std::string>& ids) {
  if (member_preds.empty()) throw ConfigError("ensemble: no members");
  const std::size_t n = y.size();
  for (const auto& p : member_preds)
    if (p.size() != n)
      throw ShapeError("ensemble: member prediction length mismatch");
  if (!ids.empty() && ids.size() != member_preds.size())
    throw ShapeError("ensemble: id list length mismatch");

  const std::size_t m = member_preds.size();
  EnsembleReport rep;
  for (std::size_t i = 0; i < m; ++i)
    rep.member_ids.push_back(ids.empty() ? "member" + std::to_string(i)
                                         : ids[i]);

  std::vector<double> mean_pred(n, 0.0);
  for (const auto& p : member_preds)
    for (std::size_t j = 0; j < n; ++j) mean_pred[j] += p[j];
  for (double& v : mean_pred) v /= static_cast<double>(m);

  // Population variance of the target normalizes every term, so the
  // decomposition reads in NMSE units.
  double ybar = 0.0;
  for (double v : y) ybar += v;
  ybar /= static_cast<double>(n);
  double var = 0.0;
  for (double v : y) var += sq(v - ybar);
  var /= static_cast<double>(n);
  if (!(var > 0.0)) throw NumericError("ensemble: constant target");

  double amb = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double mse = 0.0, gap = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      mse += sq(member_preds[i][j] - y[j]);
      gap += sq(member_preds[i][j] - mean_pred[j]);
    }
    rep.member_nmse.push_back(mse / (static_cast<double>(n) * var));
    amb += gap / (static_cast<double>(n) * var);
  }
  rep.ambiguity = amb / static_cast<double>(m);

  double ens = 0.0;
  for (std::size_t j = 0; j < n; ++j) ens += sq(mean_pred[j] - y[j]);
  rep.ensemble_nmse = ens / (static_cast<double>(n) * var);
  return rep;
}

}  // namespace vollab
