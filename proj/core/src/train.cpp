#include "vollab/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "vollab/common.hpp"

namespace vollab {

// ============================================================================
// Config validation
// ============================================================================

void TrainConfig::validate() const {
  model.validate();
  opt.validate();
  if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  if (max_epochs == 0) throw ConfigError("train: max_epochs must be >= 1");
  if (patience == 0) throw ConfigError("train: patience must be >= 1");
}

std::size_t steps_per_epoch(std::size_t n_rows, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  return (n_rows + batch_size - 1) / batch_size;
}

// ============================================================================
// Step-granular runner
// ============================================================================

std::vector<std::size_t> batch_at_step(const std::vector<std::size_t>& rows,
                                       std::size_t batch_size,
                                       std::uint64_t shuffle_seed,
                                       std::int64_t step) {
  if (rows.empty()) throw ConfigError("batch_at_step: empty training pool");
  if (step < 0) throw ConfigError("batch_at_step: negative step");
  const std::size_t spe = steps_per_epoch(rows.size(), batch_size);
  const std::int64_t epoch = step / static_cast<std::int64_t>(spe);
  const std::size_t slot =
      static_cast<std::size_t>(step % static_cast<std::int64_t>(spe));
  std::vector<std::size_t> order = rows;
  Rng r(shuffle_seed, static_cast<std::uint64_t>(epoch) + 1);
  r.shuffle(order);
  const std::size_t lo = slot * batch_size;
  const std::size_t hi = std::min(lo + batch_size, rows.size());
  return std::vector<std::size_t>(order.begin() + lo, order.begin() + hi);
}

StepRunResult run_steps(const WindowedDataset& ds, Parameters& params,
                        OptimizerState& state, const OptimizerConfig& opt,
                        const std::vector<std::size_t>& rows,
                        std::size_t batch_size, std::int64_t n_steps,
                        std::uint64_t shuffle_seed, const StepHook& hook) {
  if (rows.empty()) throw ConfigError("run_steps: empty training pool");

  StepRunResult res;
  for (std::int64_t k = 0; k < n_steps; ++k) {
    const std::int64_t step = params.step_count;
    const std::vector<std::size_t> batch =
        batch_at_step(rows, batch_size, shuffle_seed, step);

    try {
      Gradients g;
      const double loss = grad_on_rows(params, ds, batch, g);
      if (hook) hook(step, params, loss);
      opt_step(opt, params, g, state);
    } catch (const NumericError&) {
      res.diverged = true;
      return res;
    }
    res.steps_done += 1;
  }
  return res;
}

// ============================================================================
// NMSE
// ============================================================================

double nmse(const std::vector<double>& pred, const std::vector<double>& y) {
  if (pred.size() != y.size() || y.empty())
    throw ShapeError("nmse: prediction/target length mismatch");
  const double n = static_cast<double>(y.size());
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n;
  double var = 0.0, err = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    var += sq(y[i] - mean);
    err += sq(pred[i] - y[i]);
  }
  var /= n;
  err /= n;
  if (!(var > 0.0))
    throw NumericError("nmse: undefined for a constant target");
  return err / var;
}

// ============================================================================
// Epoch-level training
// ============================================================================

namespace {

double test_score(const Parameters& p, const WindowedDataset& ds,
                  const std::vector<std::size_t>& rows_te) {
  const std::vector<double> pred = predict_rows(p, ds, rows_te);
  std::vector<double> truth(rows_te.size());
  for (std::size_t i = 0; i < rows_te.size(); ++i) truth[i] = ds.y[rows_te[i]];
  return nmse(pred, truth);
}

}  // namespace

TrainReport train_one(const WindowedDataset& ds, const TrainConfig& cfg,
                      const StepHook& hook) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::size_t> rows_tr = ds.rows_of(Split::train);
  const std::vector<std::size_t> rows_val = ds.rows_of(Split::val);
  const std::vector<std::size_t> rows_te = ds.rows_of(Split::test);
  if (rows_tr.empty()) throw ConfigError("train: empty train split");
  if (rows_val.empty()) throw ConfigError("train: empty validation split");

  Parameters params = init_params(cfg.model, cfg.init_seed);
  OptimizerState state = OptimizerState::zeros_like(params);
  const std::size_t spe = steps_per_epoch(rows_tr.size(), cfg.batch_size);

  TrainReport rep;
  rep.best_params = params;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t seen = 0;
    const StepHook inner = [&](std::int64_t step, const Parameters& p,
                               double batch_loss) {
      const std::size_t slot =
          static_cast<std::size_t>(step % static_cast<std::int64_t>(spe));
      const std::size_t bs =
          std::min(cfg.batch_size, rows_tr.size() - slot * cfg.batch_size);
      loss_sum += batch_loss * static_cast<double>(bs);
      seen += bs;
      if (hook) hook(step, p, batch_loss);
    };

    const StepRunResult r =
        run_steps(ds, params, state, cfg.opt, rows_tr, cfg.batch_size,
                  static_cast<std::int64_t>(spe), cfg.shuffle_seed, inner);
    if (r.diverged) {
      rep.diverged = true;
      break;
    }

    EpochRecord rec;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.val_loss = loss_on_rows(params, ds, rows_val);
    rep.epochs.push_back(rec);

    if (!std::isfinite(rec.val_loss)) {
      rep.diverged = true;
      break;
    }
    if (rec.val_loss < rep.best_val) {  // strict improvement only
      rep.best_val = rec.val_loss;
      rep.best_epoch = epoch;
      rep.best_params = params;
      since_best = 0;
    } else {
      since_best += 1;
      if (since_best >= cfg.patience) break;
    }
  }

  if (!rows_te.empty() && rep.best_epoch > 0)
    rep.test_nmse = test_score(rep.best_params, ds, rows_te);
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return rep;
}

TrainReport refit_final(const WindowedDataset& ds, const TrainConfig& cfg,
                        std::size_t n_epochs) {
  cfg.validate();
  if (n_epochs == 0) throw ConfigError("refit: n_epochs must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();

  // Pool train and validation rows, keeping dataset order.
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.split.size(); ++i)
    if (ds.split[i] != static_cast<std::uint8_t>(Split::test)) rows.push_back(i);
  const std::vector<std::size_t> rows_te = ds.rows_of(Split::test);
  if (rows.empty()) throw ConfigError("refit: empty train+val pool");

  Parameters params = init_params(cfg.model, cfg.init_seed);
  OptimizerState state = OptimizerState::zeros_like(params);
  const std::size_t spe = steps_per_epoch(rows.size(), cfg.batch_size);

  TrainReport rep;
  for (std::size_t epoch = 1; epoch <= n_epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t seen = 0;
    const StepHook inner = [&](std::int64_t step, const Parameters&,
                               double batch_loss) {
      const std::size_t slot =
          static_cast<std::size_t>(step % static_cast<std::int64_t>(spe));
      const std::size_t bs =
          std::min(cfg.batch_size, rows.size() - slot * cfg.batch_size);
      loss_sum += batch_loss * static_cast<double>(bs);
      seen += bs;
    };
    const StepRunResult r =
        run_steps(ds, params, state, cfg.opt, rows, cfg.batch_size,
                  static_cast<std::int64_t>(spe), cfg.shuffle_seed, inner);
    if (r.diverged) {
      rep.diverged = true;
      break;
    }
    EpochRecord rec;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rep.epochs.push_back(rec);
  }

  rep.best_epoch = rep.epochs.size();
  rep.best_params = params;  // final parameters, not a validation checkpoint
  if (!rows_te.empty() && !rep.diverged)
    rep.test_nmse = test_score(params, ds, rows_te);
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return rep;
}

// ============================================================================
// Sweep
// ============================================================================

HyperRange hyper_range(OptKind kind) {
  switch (kind) {
    case OptKind::SGD: return {1e-5, 1e-1, 1e-5, 1.0};
    case OptKind::Adam: return {1e-5, 1e-1, 1e-4, 1e-1};
    case OptKind::Muon: return {1e-5, 1e-1, 1e-5, 5.0};
  }
  throw ConfigError("hyper_range: unknown optimizer");
}

std::pair<double, double> sample_hyper(OptKind kind, Rng& rng) {
  const HyperRange hr = hyper_range(kind);
  const double lr = rng.log_uniform(hr.lr_lo, hr.lr_hi);
  const double wd = rng.log_uniform(hr.wd_lo, hr.wd_hi);
  return {lr, wd};
}

SweepResult sweep(const WindowedDataset& ds, const TrainConfig& base,
                  std::size_t n_trials, std::uint64_t sweep_seed) {
  if (n_trials == 0) throw ConfigError("sweep: n_trials must be >= 1");
  SweepResult out;
  out.trials.reserve(n_trials);
  bool have_winner = false;

  for (std::size_t i = 0; i < n_trials; ++i) {
    Rng rng(sweep_seed, static_cast<std::uint64_t>(i) + 1);
    const auto [lr, wd] = sample_hyper(base.opt.kind, rng);
    TrainConfig cfg = base;
    cfg.opt.lr = lr;
    cfg.opt.weight_decay = wd;

    TrainReport rep = train_one(ds, cfg);
    Trial tr;
    tr.lr = lr;
    tr.weight_decay = wd;
    tr.val_loss = rep.best_val;
    tr.best_epoch = rep.best_epoch;
    tr.diverged = rep.diverged;
    out.trials.push_back(tr);

    if (tr.diverged) continue;
    const Trial& w = out.trials[out.winner_idx];
    const bool better =
        !have_winner || tr.val_loss < w.val_loss ||
        (tr.val_loss == w.val_loss && tr.lr < w.lr);
    if (better) {
      out.winner_idx = i;
      out.winner_cfg = cfg;
      out.winner_report = std::move(rep);
      have_winner = true;
    }
  }
  if (!have_winner) throw NumericError("sweep: every trial diverged");
  return out;
}

// ============================================================================
// Multi-seed replication
// ============================================================================

MultiSeedResult multi_seed(const WindowedDataset& ds, const TrainConfig& cfg,
                           std::size_t n_seeds) {
  if (n_seeds == 0) throw ConfigError("multi_seed: n_seeds must be >= 1");
  if (ds.rows_of(Split::test).empty())
    throw ConfigError("multi_seed: empty test split");

  MultiSeedResult out;
  out.runs.reserve(n_seeds);
  double sum = 0.0;
  for (std::size_t s = 0; s < n_seeds; ++s) {
    TrainConfig c = cfg;
    c.init_seed = cfg.init_seed + s;
    c.shuffle_seed = cfg.shuffle_seed + s;
    const TrainReport rep = train_one(ds, c);

    SeedRun run;
    run.init_seed = c.init_seed;
    run.shuffle_seed = c.shuffle_seed;
    run.val_loss = rep.best_val;
    run.best_epoch = rep.best_epoch;
    run.diverged = rep.diverged || !rep.test_nmse.has_value();
    if (!run.diverged) {
      run.test_nmse = *rep.test_nmse;
      sum += run.test_nmse;
      out.n_ok += 1;
    }
    out.runs.push_back(run);
  }

  if (out.n_ok > 0) {
    out.mean_nmse = sum / static_cast<double>(out.n_ok);
    if (out.n_ok > 1) {
      double ss = 0.0;
      for (const SeedRun& r : out.runs)
        if (!r.diverged) ss += sq(r.test_nmse - out.mean_nmse);
      out.std_nmse = std::sqrt(ss / static_cast<double>(out.n_ok - 1));
    } else {
      out.std_nmse = 0.0;
    }
  }
  return out;
}

}  // namespace vollab
