#pragma once
// Loss-surface curvature probes: finite-difference Hessian-vector products,
// leading-eigenvalue estimation by power iteration, mini-batch sharpness, a
// step-size stability boundary (2/lr), training traces of those quantities,
// a power-law fit of steps-to-target against dataset size, and the mid-run
// optimizer-swap experiment.

#include <cstdint>
#include <optional>
#include <vector>

#include "vollab/objective.hpp"
#include "vollab/train.hpp"

namespace vollab {

// ============================================================================
// Hessian probes
// ============================================================================

// Central-difference Hessian-vector product H(theta) v. The probe direction
// is normalized before stepping, with step eps0 * (1 + ||theta||), and the
// result rescaled by ||v||; v = 0 returns the zero vector.
std::vector<double> hvp(const Objective& obj, const std::vector<double>& theta,
                        const std::vector<double>& v, double eps0 = 1e-4);

struct PowerIterResult {
  double lambda = 0.0;
  std::vector<double> vec;  // unit eigenvector estimate
  std::size_t iters = 0;
  bool converged = false;
};

// Algebraically largest Hessian eigenvalue at theta via power iteration on
// the HVP operator. Converges when the Rayleigh quotient moves by no more
// than tol * max(1, |lambda|) between iterations. When the dominant
// eigenvalue by magnitude is negative (or the plain iteration stalls), a
// second pass runs on the shifted operator H + sI, s just above the spectral
// radius, whose dominant eigenvalue is lambda_max + s; the shift is then
// subtracted out. An optional warm-start vector (e.g. the previous probe's
// eigenvector) replaces the seeded random start.
PowerIterResult lambda_max(const Objective& obj,
                           const std::vector<double>& theta,
                           std::size_t max_iters = 100, double tol = 1e-6,
                           std::uint64_t seed = 0,
                           const std::vector<double>* warm = nullptr,
                           double eps0 = 1e-4);

// g^T H g / ||g||^2 with g the gradient of obj at theta — the curvature along
// the step direction actually taken. Throws NumericError at a stationary
// point (||g|| = 0).
double batch_sharpness(const Objective& obj, const std::vector<double>& theta,
                       double eps0 = 1e-4);

// Stability boundary of gradient descent with step size eta on a quadratic:
// an eigendirection with curvature lambda is non-divergent iff
// lambda <= 2/eta (boundary included).
bool stable_set_member(double lambda, double eta);

// ============================================================================
// Curvature traces along training
// ============================================================================

struct TracePoint {
  std::int64_t step = 0;
  double loss = 0.0;        // full loss on the probe rows
  double lambda_max = 0.0;  // leading curvature on the probe rows
  double sharpness = 0.0;   // batch sharpness on the step's own mini-batch
};

struct TraceConfig {
  TrainConfig train;
  std::int64_t n_steps = 200;
  std::int64_t probe_every = 50;
  std::size_t probe_rows = 4096;  // train rows (dataset order) for lambda_max
  std::size_t power_iters = 60;
  double power_tol = 1e-4;
  double fd_eps = 1e-4;
};

struct CurvatureTrace {
  std::vector<TracePoint> points;
  double eta = 0.0;  // the step size the trace was run with
  std::optional<std::int64_t> eos_step;
  bool diverged = false;
};

// First probe step whose leading curvature strictly exceeds 2/eta, if any.
std::optional<std::int64_t> eos_entry(const std::vector<TracePoint>& points,
                                      double eta);

// Trains for n_steps, probing every probe_every steps (plus at the final
// step): loss and warm-started lambda_max on a fixed probe subset of the
// train split, and sharpness on the mini-batch about to be applied.
CurvatureTrace curvature_trace(const WindowedDataset& ds,
                               const TraceConfig& cfg);

// ============================================================================
// Steps-to-target scaling
// ============================================================================

// Trains on the given row pool until the loss over that same pool drops to
// target_loss or below, checking every check_every steps; returns the step
// count at the first passing check, or nullopt if max_steps is exhausted or
// the run diverges. The pool doubles as the dataset size in scaling studies.
std::optional<std::int64_t> steps_to_target(const WindowedDataset& ds,
                                            const TrainConfig& cfg,
                                            const std::vector<std::size_t>& rows,
                                            double target_loss,
                                            std::int64_t check_every,
                                            std::int64_t max_steps);

struct ScalingPoint {
  double dataset_size = 0.0;
  double steps = 0.0;
};

struct ScalingFit {
  double beta = 0.0;           // exponent in steps ~ c * size^beta
  double log_c = 0.0;
  double c = 1.0;
  double max_abs_resid = 0.0;  // worst log-space residual of the fit
};

// Least-squares line through (ln size, ln steps). Needs >= 2 points with
// distinct sizes, all positive.
ScalingFit fit_scaling_law(const std::vector<ScalingPoint>& points);

double extrapolate_steps(const ScalingFit& fit, double dataset_size);

// ============================================================================
// Optimizer-swap intervention
// ============================================================================

struct InterventionConfig {
  TrainConfig base;          // donor arm: model, seeds, donor optimizer
  OptimizerConfig target_opt;
  std::int64_t swap_step = 0;
  std::int64_t total_steps = 0;

  void validate() const;
};

struct InterventionArm {
  Parameters params;
  bool diverged = false;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

// Two arms sharing one initialization and one batch stream: "swapped" trains
// under the donor optimizer for swap_step steps, discards optimizer state,
// and continues under target_opt; "scratch" trains under target_opt from
// step 0. Both run total_steps steps in all.
struct InterventionReport {
  InterventionArm swapped;
  InterventionArm scratch;
};

InterventionReport run_intervention(const WindowedDataset& ds,
                                    const InterventionConfig& cfg);

}  // namespace vollab
