#pragma once
// Functional-divergence instruments. A small predictor abstraction lets the
// same probes run over trained networks, linear baselines, ensembles, and
// hand-built test functions: impulse-response curves, response and difference
// surfaces with a planarity score, sampled-permutation Shapley lag
// attributions, and the ensemble ambiguity decomposition.

#include <cstdint>
#include <string>
#include <vector>

#include "vollab/engine.hpp"
#include "vollab/linear.hpp"
#include "vollab/model.hpp"
#include "vollab/rng.hpp"

namespace vollab {

// ============================================================================
// Predictor abstraction
// ============================================================================

struct Predictor {
  virtual ~Predictor() = default;
  virtual std::size_t input_len() const = 0;
  // X: n rows of input_len() features, row-major; writes n outputs.
  virtual void predict(const double* X, std::size_t n, double* out) const = 0;
  double predict_one(const double* x) const;
};

class ModelPredictor final : public Predictor {
 public:
  explicit ModelPredictor(const Parameters& p) : p_(&p) {}
  std::size_t input_len() const override;
  void predict(const double* X, std::size_t n, double* out) const override;

 private:
  const Parameters* p_;
};

class LinearPredictor final : public Predictor {
 public:
  explicit LinearPredictor(const LinearModel& m) : m_(&m) {}
  std::size_t input_len() const override { return m_->w.size(); }
  void predict(const double* X, std::size_t n, double* out) const override;

 private:
  const LinearModel* m_;
};

// Equal-weight mean of member outputs. Members must agree on input length
// and outlive the ensemble.
class EnsemblePredictor final : public Predictor {
 public:
  explicit EnsemblePredictor(std::vector<const Predictor*> members);
  std::size_t input_len() const override;
  void predict(const double* X, std::size_t n, double* out) const override;

 private:
  std::vector<const Predictor*> members_;
};

// ============================================================================
// Impulse responses and surfaces
// ============================================================================

// Inclusive linear grid of shock values (default 81 points on [-4, 4]).
std::vector<double> delta_grid(double lo = -4.0, double hi = 4.0,
                               std::size_t n = 81);

// Model output with lag k set to shock delta and every other input held at
// the standardized mean (zero): curve[j] = f(deltas[j] * e_k).
std::vector<double> impulse_response(const Predictor& f, std::size_t k,
                                     const std::vector<double>& deltas);

struct ResponseSurface {
  std::vector<std::size_t> lags;
  std::vector<double> deltas;
  std::vector<double> R;  // lags.size() x deltas.size(), row-major
  double at(std::size_t ki, std::size_t di) const {
    return R[ki * deltas.size() + di];
  }
};

ResponseSurface response_surface(const Predictor& f,
                                 const std::vector<std::size_t>& lags,
                                 const std::vector<double>& deltas);

// All lags 0..L-1 of the predictor.
ResponseSurface response_surface(const Predictor& f,
                                 const std::vector<double>& deltas);

struct DifferenceSurface {
  std::vector<std::size_t> lags;
  std::vector<double> deltas;
  std::vector<double> D;     // A minus B, same layout as ResponseSurface::R
  double planarity = 0.0;    // max |D - (a_k + b_k*delta)| over the grid,
                             // with (a_k, b_k) per-lag least-squares fits
};

// Pointwise A - B; grids must match exactly. The planarity score measures
// deviation from per-lag affinity in the shock: it is ~0 whenever both
// models respond affinely (e.g. two linear models), and grows with
// nonlinear disagreement.
DifferenceSurface difference_surface(const ResponseSurface& A,
                                     const ResponseSurface& B);

// ============================================================================
// Shapley lag attribution
// ============================================================================

// One row's Shapley values by permutation sampling against a fixed
// background: each sampled ordering reveals features of x one at a time and
// credits each feature its output increment. phi and se (standard error of
// each mean over the n_perm orderings) are resized to input_len(). The
// telescoping walk makes efficiency Σφ = f(x) − f(bg) hold exactly for any
// sample of orderings.
void shapley_row(const Predictor& f, const double* x, const double* background,
                 std::size_t n_perm, Rng& rng, std::vector<double>& phi,
                 std::vector<double>& se);

// Exact Shapley values by enumerating all L! orderings (L <= 8).
void shapley_row_exact(const Predictor& f, const double* x,
                       const double* background, std::vector<double>& phi);

struct AttributionReport {
  std::vector<double> mean_abs_phi;  // per lag, averaged over eval rows
  std::vector<double> stderr_phi;    // per lag: std of |phi| across rows / sqrt(n)
  std::size_t n_rows = 0;
  std::size_t n_perm = 0;
  bool exact = false;
  double background_value = 0.0;  // constant background level (zero vector)
};

// Attribution over eval rows (row-major n x L) against the zero background.
// exact = true enumerates orderings instead of sampling (requires L <= 8).
AttributionReport shapley_attribution(const Predictor& f, const double* X,
                                      std::size_t n_rows, std::size_t n_perm,
                                      std::uint64_t seed, bool exact = false);

// ============================================================================
// Ensembles
// ============================================================================

struct EnsembleReport {
  std::vector<std::string> member_ids;
  std::vector<double> member_nmse;
  double ensemble_nmse = 0.0;
  double ambiguity = 0.0;  // mean squared member-vs-ensemble gap, NMSE units
};

// Equal-weight ensemble of precomputed member predictions, with the
// decomposition ensemble = mean(member) - ambiguity (all in NMSE units).
EnsembleReport ensemble_report(
    const std::vector<std::vector<double>>& member_preds,
    const std::vector<double>& y,
    const std::vector<std::string>& ids = {});

}  // namespace vollab
