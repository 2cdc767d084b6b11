#pragma once
// Shared oracle helpers for the test suite. Everything here is deliberately
// implemented independently of the library code it checks: coordinate-wise
// finite differences, dense eigensolves, subset-enumeration Shapley values,
// and a from-scratch quantile.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "vollab/diagnostics.hpp"
#include "vollab/ingest.hpp"
#include "vollab/model.hpp"
#include "vollab/objective.hpp"

namespace testutil {

// Relative-or-absolute closeness, the form used by the gradient checks.
inline bool close(double a, double b, double rel, double abs_tol) {
  const double diff = std::fabs(a - b);
  return diff <= abs_tol || diff <= rel * std::max(std::fabs(a), std::fabs(b));
}

// ============================================================================
// Finite-difference oracles
// ============================================================================

// Central-difference gradient of a scalar function of a flat vector.
inline std::vector<double> fd_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& theta, double eps = 1e-5) {
  std::vector<double> g(theta.size());
  std::vector<double> work = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    work[i] = theta[i] + eps;
    const double up = f(work);
    work[i] = theta[i] - eps;
    const double dn = f(work);
    work[i] = theta[i];
    g[i] = (up - dn) / (2.0 * eps);
  }
  return g;
}

// Dense Hessian by coordinate-wise central differences of the gradient.
inline Eigen::MatrixXd fd_dense_hessian(const vollab::Objective& obj,
                                        const std::vector<double>& theta,
                                        double eps = 1e-5) {
  const auto n = static_cast<Eigen::Index>(theta.size());
  Eigen::MatrixXd H(n, n);
  std::vector<double> work = theta, gp, gm;
  for (Eigen::Index j = 0; j < n; ++j) {
    work[static_cast<std::size_t>(j)] = theta[static_cast<std::size_t>(j)] + eps;
    obj.loss_grad(work, gp);
    work[static_cast<std::size_t>(j)] = theta[static_cast<std::size_t>(j)] - eps;
    obj.loss_grad(work, gm);
    work[static_cast<std::size_t>(j)] = theta[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < n; ++i)
      H(i, j) = (gp[static_cast<std::size_t>(i)] - gm[static_cast<std::size_t>(i)]) /
                (2.0 * eps);
  }
  return 0.5 * (H + H.transpose());  // symmetrize FD noise
}

inline double top_eigenvalue(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  return es.eigenvalues().maxCoeff();
}

// ============================================================================
// Reference statistics
// ============================================================================

// Linear-interpolation quantile written from the textbook formula.
inline double ref_quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double pop_var(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

// Lag-1 autocorrelation.
inline double autocorr1(const std::vector<double>& v) {
  const double m = mean_of(v);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) den += (v[i] - m) * (v[i] - m);
  for (std::size_t i = 1; i < v.size(); ++i)
    num += (v[i] - m) * (v[i - 1] - m);
  return num / den;
}

// ============================================================================
// Shapley subset-enumeration oracle
// ============================================================================

// Exact Shapley value of feature k by summing over all subsets of the other
// features with the classical |S|!(L-|S|-1)!/L! weights. Exponential in L;
// keep L <= 12.
inline double brute_shapley(const vollab::Predictor& f, const double* x,
                            const double* bg, std::size_t k) {
  const std::size_t L = f.input_len();
  std::vector<double> fact(L + 1, 1.0);
  for (std::size_t i = 1; i <= L; ++i)
    fact[i] = fact[i - 1] * static_cast<double>(i);

  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < L; ++i)
    if (i != k) others.push_back(i);

  std::vector<double> row(L);
  double phi = 0.0;
  const std::size_t n_sub = std::size_t{1} << others.size();
  for (std::size_t mask = 0; mask < n_sub; ++mask) {
    std::size_t s = 0;
    for (std::size_t i = 0; i < L; ++i) row[i] = bg[i];
    for (std::size_t b = 0; b < others.size(); ++b)
      if (mask & (std::size_t{1} << b)) {
        row[others[b]] = x[others[b]];
        ++s;
      }
    const double without = f.predict_one(row.data());
    row[k] = x[k];
    const double with_k = f.predict_one(row.data());
    phi += fact[s] * fact[L - s - 1] / fact[L] * (with_k - without);
  }
  return phi;
}

// ============================================================================
// Tiny model configs (every architecture under 5k parameters)
// ============================================================================

inline vollab::ModelConfig tiny_mlp(std::size_t L = 12) {
  vollab::ModelConfig m;
  m.arch = vollab::Arch::MLP;
  m.L = L;
  m.mlp.hidden = {8, 4};
  return m;
}

inline vollab::ModelConfig tiny_cnn(std::size_t L = 12) {
  vollab::ModelConfig m;
  m.arch = vollab::Arch::CNN;
  m.L = L;
  m.cnn.channels = {3, 4};
  m.cnn.kernel = 3;
  m.cnn.padding = 1;
  m.cnn.pool = 4;
  m.cnn.head = {6};
  return m;
}

inline vollab::ModelConfig tiny_lstm(std::size_t L = 10) {
  vollab::ModelConfig m;
  m.arch = vollab::Arch::LSTM;
  m.L = L;
  m.lstm.layers = 2;
  m.lstm.hidden = 6;
  return m;
}

inline vollab::ModelConfig tiny_tf(std::size_t L = 8) {
  vollab::ModelConfig m;
  m.arch = vollab::Arch::Transformer;
  m.L = L;
  m.tf.layers = 2;
  m.tf.d_model = 8;
  m.tf.heads = 2;
  m.tf.ff_mult = 2;
  m.tf.head = {6};
  return m;
}

inline std::vector<vollab::ModelConfig> tiny_all() {
  return {tiny_mlp(), tiny_cnn(), tiny_lstm(), tiny_tf()};
}

// Small windowed dataset straight from the synthetic pipeline.
inline vollab::WindowedDataset tiny_dataset(std::size_t n_assets = 3,
                                            std::size_t n_days = 160,
                                            std::size_t L = 12,
                                            std::uint64_t seed = 5) {
  vollab::Panel panel =
      vollab::synth_panel(n_assets, n_days, vollab::SynthParams{}, seed);
  vollab::IngestConfig cfg;
  cfg.L = L;
  return vollab::build_dataset(panel, cfg);
}

}  // namespace testutil
