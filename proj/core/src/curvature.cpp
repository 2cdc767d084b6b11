#include "vollab/curvature.hpp"

#include <algorithm>
#include <cmath>

#include "vollab/common.hpp"
#include "vollab/rng.hpp"

namespace vollab {

// ============================================================================
// Hessian probes
// ============================================================================

namespace {

double vnorm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double vdot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

std::vector<double> hvp(const Objective& obj, const std::vector<double>& theta,
                        const std::vector<double>& v, double eps0) {
  if (theta.size() != obj.dim() || v.size() != obj.dim())
    throw ShapeError("hvp: dimension mismatch");
  if (!(eps0 > 0.0)) throw ConfigError("hvp: eps0 must be positive");

  const double nv = vnorm(v);
  if (nv == 0.0) return std::vector<double>(obj.dim(), 0.0);
  const double eps = eps0 * (1.0 + vnorm(theta));

  std::vector<double> plus(theta), minus(theta);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double d = eps * (v[i] / nv);
    plus[i] += d;
    minus[i] -= d;
  }
  std::vector<double> gp, gm;
  obj.loss_grad(plus, gp);
  obj.loss_grad(minus, gm);

  std::vector<double> out(obj.dim());
  const double scale = nv / (2.0 * eps);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * (gp[i] - gm[i]);
  return out;
}

namespace {

struct PowerPhase {
  double rayleigh = 0.0;  // Rayleigh quotient of H itself (shift removed)
  std::vector<double> vec;
  std::size_t iters = 0;
  bool converged = false;
  double radius_lb = 0.0;  // running lower bound on the spectral radius
};

// Power iteration on H + shift*I starting from a unit vector. Convergence is
// judged on the de-shifted Rayleigh quotient. ||(H + sI)v|| and |rayleigh|
// both lower-bound the shifted spectral radius; the largest value seen feeds
// the caller's shift choice (only meaningful when shift == 0).
PowerPhase power_phase(const Objective& obj, const std::vector<double>& theta,
                       std::vector<double> v0, double shift,
                       std::size_t max_iters, double tol, double eps0) {
  PowerPhase r;
  r.vec = std::move(v0);
  const std::size_t d = r.vec.size();
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t it = 0; it < max_iters; ++it) {
    std::vector<double> w = hvp(obj, theta, r.vec, eps0);
    if (shift != 0.0)
      for (std::size_t i = 0; i < d; ++i) w[i] += shift * r.vec[i];
    const double ray = vdot(r.vec, w);  // of the shifted operator
    r.rayleigh = ray - shift;
    r.iters = it + 1;
    const double nw = vnorm(w);
    r.radius_lb = std::max({r.radius_lb, nw, std::fabs(ray)});
    if (std::isfinite(prev) &&
        std::fabs(r.rayleigh - prev) <=
            tol * std::max(1.0, std::fabs(r.rayleigh))) {
      r.converged = true;
      return r;
    }
    prev = r.rayleigh;
    if (nw == 0.0) {  // exact eigenvector of eigenvalue -shift
      r.rayleigh = -shift;
      r.converged = true;
      return r;
    }
    for (std::size_t i = 0; i < d; ++i) r.vec[i] = w[i] / nw;
  }
  return r;
}

std::vector<double> unit_random(std::size_t d, std::uint64_t seed,
                                std::uint64_t stream) {
  Rng rng(seed, stream);
  std::vector<double> v(d);
  double n = 0.0;
  while (n == 0.0) {  // astronomically unlikely to loop
    for (double& x : v) x = rng.normal();
    n = vnorm(v);
  }
  for (double& x : v) x /= n;
  return v;
}

}  // namespace

PowerIterResult lambda_max(const Objective& obj,
                           const std::vector<double>& theta,
                           std::size_t max_iters, double tol,
                           std::uint64_t seed,
                           const std::vector<double>* warm, double eps0) {
  if (max_iters == 0) throw ConfigError("lambda_max: max_iters must be >= 1");
  const std::size_t d = obj.dim();

  std::vector<double> v0;
  if (warm && warm->size() == d) {
    const double n = vnorm(*warm);
    if (n > 0.0 && std::isfinite(n)) {
      v0 = *warm;
      for (double& x : v0) x /= n;
    }
  }
  if (v0.empty()) v0 = unit_random(d, seed, 0xC04);

  // Phase 1: plain iteration. If it settles on a positive eigenvalue, that
  // is the dominant one and therefore the algebraic maximum.
  const PowerPhase p1 =
      power_phase(obj, theta, std::move(v0), 0.0, max_iters, tol, eps0);
  PowerIterResult res;
  if (p1.converged && p1.rayleigh > 0.0) {
    res.lambda = p1.rayleigh;
    res.vec = p1.vec;
    res.iters = p1.iters;
    res.converged = true;
    return res;
  }

  // Phase 2: shift the spectrum non-negative so the algebraic maximum is
  // also the dominant eigenvalue. The phase-1 eigenvector would start this
  // iteration near the bottom of the shifted spectrum, so restart randomly.
  const double shift = p1.radius_lb + tol * (1.0 + p1.radius_lb);
  const PowerPhase p2 = power_phase(obj, theta, unit_random(d, seed, 0xC05),
                                    shift, max_iters, tol, eps0);
  res.lambda = p2.rayleigh;
  res.vec = p2.vec;
  res.iters = p1.iters + p2.iters;
  res.converged = p2.converged;
  return res;
}

double batch_sharpness(const Objective& obj, const std::vector<double>& theta,
                       double eps0) {
  std::vector<double> g;
  obj.loss_grad(theta, g);
  const double gg = vdot(g, g);
  if (gg == 0.0)
    throw NumericError("batch_sharpness: zero gradient (stationary point)");
  const std::vector<double> h = hvp(obj, theta, g, eps0);
  return vdot(g, h) / gg;
}

bool stable_set_member(double lambda, double eta) {
  if (!(eta > 0.0)) throw ConfigError("stable_set_member: eta must be positive");
  return lambda <= 2.0 / eta;
}

// ============================================================================
// Curvature traces
// ============================================================================

std::optional<std::int64_t> eos_entry(const std::vector<TracePoint>& points,
                                      double eta) {
  if (!(eta > 0.0)) throw ConfigError("eos_entry: eta must be positive");
  const double bound = 2.0 / eta;
  for (const TracePoint& p : points)
    if (p.lambda_max > bound) return p.step;  // strictly above the boundary
  return std::nullopt;
}

CurvatureTrace curvature_trace(const WindowedDataset& ds,
                               const TraceConfig& cfg) {
  cfg.train.validate();
  if (cfg.n_steps < 1) throw ConfigError("trace: n_steps must be >= 1");
  if (cfg.probe_every < 1) throw ConfigError("trace: probe_every must be >= 1");
  if (cfg.probe_rows == 0) throw ConfigError("trace: probe_rows must be >= 1");

  const std::vector<std::size_t> rows_tr = ds.rows_of(Split::train);
  if (rows_tr.empty()) throw ConfigError("trace: empty train split");
  const std::vector<std::size_t> probe(
      rows_tr.begin(),
      rows_tr.begin() +
          static_cast<std::ptrdiff_t>(std::min(cfg.probe_rows, rows_tr.size())));

  Parameters params = init_params(cfg.train.model, cfg.train.init_seed);
  OptimizerState state = OptimizerState::zeros_like(params);

  CurvatureTrace trace;
  trace.eta = cfg.train.opt.lr;
  std::vector<double> warm;

  const auto probe_now = [&]() {
    const std::vector<double> theta = params.flatten();
    const ModelObjective full(ds, params, probe);
    const PowerIterResult pr =
        lambda_max(full, theta, cfg.power_iters, cfg.power_tol,
                   cfg.train.init_seed, warm.empty() ? nullptr : &warm,
                   cfg.fd_eps);
    warm = pr.vec;

    const std::vector<std::size_t> batch =
        batch_at_step(rows_tr, cfg.train.batch_size, cfg.train.shuffle_seed,
                      params.step_count);
    const ModelObjective bobj(ds, params, batch);

    TracePoint pt;
    pt.step = params.step_count;
    pt.loss = full.loss(theta);
    pt.lambda_max = pr.lambda;
    pt.sharpness = batch_sharpness(bobj, theta, cfg.fd_eps);
    trace.points.push_back(pt);
  };

  std::int64_t done = 0;
  while (done < cfg.n_steps) {
    if (params.step_count % cfg.probe_every == 0) probe_now();
    const std::int64_t chunk =
        std::min(cfg.probe_every - params.step_count % cfg.probe_every,
                 cfg.n_steps - done);
    const StepRunResult r =
        run_steps(ds, params, state, cfg.train.opt, rows_tr,
                  cfg.train.batch_size, chunk, cfg.train.shuffle_seed);
    done += r.steps_done;
    if (r.diverged) {
      trace.diverged = true;
      break;
    }
  }
  if (!trace.diverged) probe_now();  // final state

  trace.eos_step = eos_entry(trace.points, trace.eta);
  return trace;
}

// ============================================================================
// Steps-to-target scaling
// ============================================================================

std::optional<std::int64_t> steps_to_target(const WindowedDataset& ds,
                                            const TrainConfig& cfg,
                                            const std::vector<std::size_t>& rows,
                                            double target_loss,
                                            std::int64_t check_every,
                                            std::int64_t max_steps) {
  cfg.validate();
  if (check_every < 1) throw ConfigError("steps_to_target: check_every must be >= 1");
  if (max_steps < 1) throw ConfigError("steps_to_target: max_steps must be >= 1");
  if (rows.empty()) throw ConfigError("steps_to_target: empty row pool");

  Parameters params = init_params(cfg.model, cfg.init_seed);
  OptimizerState state = OptimizerState::zeros_like(params);

  if (loss_on_rows(params, ds, rows) <= target_loss) return 0;
  while (params.step_count < max_steps) {
    const std::int64_t chunk =
        std::min(check_every, max_steps - params.step_count);
    const StepRunResult r = run_steps(ds, params, state, cfg.opt, rows,
                                      cfg.batch_size, chunk, cfg.shuffle_seed);
    if (r.diverged) return std::nullopt;
    if (loss_on_rows(params, ds, rows) <= target_loss)
      return params.step_count;
  }
  return std::nullopt;
}

ScalingFit fit_scaling_law(const std::vector<ScalingPoint>& points) {
  if (points.size() < 2)
    throw ConfigError("scaling fit: at least two points required");
  std::vector<double> x, y;
  for (const ScalingPoint& p : points) {
    if (!(p.dataset_size > 0.0) || !(p.steps > 0.0))
      throw ConfigError("scaling fit: sizes and steps must be positive");
    x.push_back(std::log(p.dataset_size));
    y.push_back(std::log(p.steps));
  }
  const double n = static_cast<double>(x.size());
  double xb = 0.0, yb = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xb += x[i];
    yb += y[i];
  }
  xb /= n;
  yb /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += sq(x[i] - xb);
    sxy += (x[i] - xb) * (y[i] - yb);
  }
  if (sxx == 0.0)
    throw NumericError("scaling fit: all dataset sizes identical");

  ScalingFit fit;
  fit.beta = sxy / sxx;
  fit.log_c = yb - fit.beta * xb;
  fit.c = std::exp(fit.log_c);
  for (std::size_t i = 0; i < x.size(); ++i)
    fit.max_abs_resid = std::max(
        fit.max_abs_resid, std::fabs(y[i] - (fit.log_c + fit.beta * x[i])));
  return fit;
}

double extrapolate_steps(const ScalingFit& fit, double dataset_size) {
  if (!(dataset_size > 0.0))
    throw ConfigError("scaling extrapolation: size must be positive");
  return fit.c * std::pow(dataset_size, fit.beta);
}

// ============================================================================
// Optimizer-swap intervention
// ============================================================================

void InterventionConfig::validate() const {
  base.validate();
  target_opt.validate();
  if (swap_step < 0 || total_steps < swap_step)
    throw ConfigError("intervention: need 0 <= swap_step <= total_steps");
  if (total_steps < 1) throw ConfigError("intervention: total_steps must be >= 1");
}

InterventionReport run_intervention(const WindowedDataset& ds,
                                    const InterventionConfig& cfg) {
  cfg.validate();
  const std::vector<std::size_t> rows_tr = ds.rows_of(Split::train);
  const std::vector<std::size_t> rows_val = ds.rows_of(Split::val);
  if (rows_tr.empty()) throw ConfigError("intervention: empty train split");

  const auto finish = [&](Parameters&& p, bool diverged) {
    InterventionArm arm;
    arm.params = std::move(p);
    arm.diverged = diverged;
    arm.train_loss = loss_on_rows(arm.params, ds, rows_tr);
    arm.val_loss =
        rows_val.empty() ? 0.0 : loss_on_rows(arm.params, ds, rows_val);
    return arm;
  };

  InterventionReport rep;
  {
    // Swapped arm: donor for swap_step steps, reset, target for the rest.
    Parameters params = init_params(cfg.base.model, cfg.base.init_seed);
    OptimizerState state = OptimizerState::zeros_like(params);
    StepRunResult r1 =
        run_steps(ds, params, state, cfg.base.opt, rows_tr,
                  cfg.base.batch_size, cfg.swap_step, cfg.base.shuffle_seed);
    bool div = r1.diverged;
    if (!div) {
      auto [p2, s2] = hard_reset(params);
      params = std::move(p2);
      state = std::move(s2);
      StepRunResult r2 = run_steps(ds, params, state, cfg.target_opt, rows_tr,
                                   cfg.base.batch_size,
                                   cfg.total_steps - cfg.swap_step,
                                   cfg.base.shuffle_seed);
      div = r2.diverged;
    }
    rep.swapped = finish(std::move(params), div);
  }
  {
    // Scratch arm: target optimizer from step 0, same init and stream.
    Parameters params = init_params(cfg.base.model, cfg.base.init_seed);
    OptimizerState state = OptimizerState::zeros_like(params);
    StepRunResult r = run_steps(ds, params, state, cfg.target_opt, rows_tr,
                                cfg.base.batch_size, cfg.total_steps,
                                cfg.base.shuffle_seed);
    rep.scratch = finish(std::move(params), r.diverged);
  }
  return rep;
}

}  // namespace vollab
