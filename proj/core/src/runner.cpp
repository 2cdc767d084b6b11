#include "vollab/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <thread>

#include "json_util.hpp"
#include "vollab/checkpoint.hpp"
#include "vollab/csv.hpp"
#include "vollab/curvature.hpp"
#include "vollab/diagnostics.hpp"
#include "vollab/linear.hpp"
#include "vollab/portfolio.hpp"
#include "vollab/sha256.hpp"
#include "vollab/train.hpp"

namespace vollab {

namespace fs = std::filesystem;

namespace {

// ============================================================================
// Run directory and manifest bookkeeping
// ============================================================================

class RunDir {
 public:
  RunDir(const std::string& sub, const RunOptions& opts) : sub_(sub) {
    cfg = opts.config_path.empty() ? RunConfig{}
                                   : load_run_config(opts.config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    cfg.validate();

    // Content address: effective config + seed + subcommand.
    const std::string key = effective_config_json(cfg) + "\n#seed=" +
                            std::to_string(cfg.seed) + "\n#sub=" + sub;
    hash_ = sha256_hex(key);
    dir_ = fs::path(opts.out_root) / (sub + "-" + hash_.substr(0, 12));
    fs::create_directories(dir_);

    manifest_["format"] = "vollab-manifest-v1";
    manifest_["version"] = kVersion;
    manifest_["subcommand"] = sub;
    manifest_["seed"] = cfg.seed;
    manifest_["config_hash"] = hash_;
    manifest_["config"] = run_config_to_json(cfg);
    manifest_["inputs"] = Json::object();
    manifest_["artifacts"] = Json::array();
    if (!opts.config_path.empty())
      input("config_file", sha256_file_hex(opts.config_path));
    t0_ = std::chrono::steady_clock::now();
  }

  std::string path(const std::string& name) {
    manifest_["artifacts"].push_back(name);
    return (dir_ / name).string();
  }

  void input(const std::string& name, const std::string& sha) {
    manifest_["inputs"][name] = sha;
  }

  void note(const std::string& key, const Json& value) {
    manifest_[key] = value;
  }

  void phase(const std::string& name) {
    const auto now = std::chrono::steady_clock::now();
    timing_.push_back(
        {name, std::chrono::duration<double>(now - t0_).count()});
    t0_ = now;
  }

  // Manifest bytes depend only on config/inputs/results; wall-clock numbers
  // go to timing.json, which is excluded from the artifact list.
  void finalize() {
    write_file((dir_ / "manifest.json").string(), manifest_.dump(2) + "\n");
    Json t;
    for (const auto& [name, secs] : timing_) t[name] = secs;
    write_file((dir_ / "timing.json").string(), t.dump(2) + "\n");
  }

  const fs::path& dir() const { return dir_; }

  RunConfig cfg;

 private:
  std::string sub_;
  std::string hash_;
  fs::path dir_;
  Json manifest_;
  std::vector<std::pair<std::string, double>> timing_;
  std::chrono::steady_clock::time_point t0_;
};

std::string fmt_or_nan(double x) {
  return std::isfinite(x) ? fmt_double(x) : "nan";
}

// ============================================================================
// Shared assembly
// ============================================================================

Panel acquire_panel(const RunConfig& cfg) {
  if (!cfg.ingest.csv.empty()) return load_panel(cfg.ingest.csv);
  return synth_panel(cfg.ingest.n_assets, cfg.ingest.n_days, cfg.ingest.synth,
                     cfg.seed);
}

TrainConfig make_train_cfg(const RunConfig& cfg) {
  TrainConfig t;
  t.model = cfg.model;
  t.opt = cfg.optim;
  t.batch_size = cfg.train.batch_size;
  t.max_epochs = cfg.train.max_epochs;
  t.patience = cfg.train.patience;
  t.init_seed = cfg.seed;
  t.shuffle_seed = cfg.seed;
  return t;
}

void write_panel_csv(const Panel& panel, const std::string& path) {
  CsvWriter w(path, {"permno", "date", "open", "high", "low", "close", "ret"});
  for (std::size_t a = 0; a < panel.n_assets(); ++a)
    for (const OhlcBar& b : panel.bars[a])
      w.row({panel.asset_ids[a], date_to_iso(b.date), fmt_double(b.open),
             fmt_double(b.high), fmt_double(b.low), fmt_double(b.close),
             fmt_double(b.ret)});
  w.close();
}

Json dataset_summary(const WindowedDataset& ds) {
  Json j;
  j["rows"] = ds.n_rows();
  j["L"] = ds.L;
  j["assets"] = ds.asset_ids.size();
  j["skipped_assets"] = ds.skipped_assets;
  j["train_rows"] = ds.count_of(Split::train);
  j["val_rows"] = ds.count_of(Split::val);
  j["test_rows"] = ds.count_of(Split::test);
  j["train_end"] = date_to_iso(ds.bounds.train_end);
  j["val_end"] = date_to_iso(ds.bounds.val_end);
  j["mu"] = ds.stats.mu;
  j["sigma"] = ds.stats.sigma;
  return j;
}

void write_epochs_csv(const TrainReport& rep, const std::string& path) {
  CsvWriter w(path, {"epoch", "train_loss", "val_loss"});
  for (std::size_t e = 0; e < rep.epochs.size(); ++e)
    w.row({std::to_string(e + 1), fmt_double(rep.epochs[e].train_loss),
           fmt_or_nan(rep.epochs[e].val_loss)});
  w.close();
}

void write_test_preds_csv(const Parameters& params, const WindowedDataset& ds,
                          const std::string& path) {
  const std::vector<std::size_t> rows = ds.rows_of(Split::test);
  const std::vector<double> pred = predict_rows(params, ds, rows);
  CsvWriter w(path, {"row", "asset", "date", "target", "prediction"});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    w.row({std::to_string(r), ds.asset_ids[ds.asset[r]],
           date_to_iso(ds.target_date[r]), fmt_double(ds.y[r]),
           fmt_double(pred[i])});
  }
  w.close();
}

Json report_to_json(const TrainReport& rep) {
  Json j;
  j["epochs_run"] = rep.epochs.size();
  j["best_epoch"] = rep.best_epoch;
  j["best_val_loss"] = rep.best_val;
  j["diverged"] = rep.diverged;
  if (rep.test_nmse)
    j["test_nmse"] = *rep.test_nmse;
  else
    j["test_nmse"] = nullptr;
  return j;
}

// Linear-baseline context rows for train reports: OLS and the LASSO path
// winner, scored on the same splits.
Json linear_baselines(const WindowedDataset& ds) {
  const auto rows_tr = ds.rows_of(Split::train);
  const auto rows_val = ds.rows_of(Split::val);
  const auto rows_te = ds.rows_of(Split::test);
  const auto gather = [&](const std::vector<std::size_t>& rows,
                          std::vector<double>& X, std::vector<double>& y) {
    X.resize(rows.size() * ds.L);
    y.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy(ds.X.v.begin() + static_cast<std::ptrdiff_t>(rows[i] * ds.L),
                ds.X.v.begin() + static_cast<std::ptrdiff_t>((rows[i] + 1) * ds.L),
                X.begin() + static_cast<std::ptrdiff_t>(i * ds.L));
      y[i] = ds.y[rows[i]];
    }
  };
  std::vector<double> Xtr, ytr, Xv, yv, Xte, yte;
  gather(rows_tr, Xtr, ytr);
  gather(rows_val, Xv, yv);
  gather(rows_te, Xte, yte);
  const auto map = [&](const std::vector<double>& X, std::size_t n) {
    return ConstMatMap(X.data(), static_cast<Eigen::Index>(n),
                       static_cast<Eigen::Index>(ds.L));
  };

  Json j;
  const LinearModel ols = ols_fit(map(Xtr, rows_tr.size()), ytr);
  j["ols_test_nmse"] = nmse(ols.predict(Xte.data(), rows_te.size()), yte);
  const LinearModel lasso = lasso_select(map(Xtr, rows_tr.size()), ytr,
                                         map(Xv, rows_val.size()), yv);
  j["lasso_alpha"] = lasso.alpha;
  j["lasso_test_nmse"] = nmse(lasso.predict(Xte.data(), rows_te.size()), yte);
  return j;
}

// ============================================================================
// Subcommand drivers
// ============================================================================

RunResult drive_synth(RunDir& rd) {
  const Panel panel = acquire_panel(rd.cfg);
  rd.phase("synthesize");
  write_panel_csv(panel, rd.path("bars.csv"));
  Json j;
  j["assets"] = panel.n_assets();
  j["days"] = panel.calendar.size();
  j["dropped_rows"] = panel.dropped_rows;
  rd.note("panel", j);
  rd.phase("write");
  return {};
}

RunResult drive_ingest(RunDir& rd, const RunOptions& opts) {
  if (!rd.cfg.ingest.csv.empty())
    rd.input("bars_csv", sha256_file_hex(rd.cfg.ingest.csv));
  const Panel panel = acquire_panel(rd.cfg);
  const WindowedDataset ds = build_dataset(panel, rd.cfg.ingest.pipeline);
  rd.phase("build");
  save_dataset(ds, (rd.dir() / "dataset").string());
  rd.path("dataset.json");
  rd.path("dataset.bin");
  rd.note("dataset", dataset_summary(ds));
  rd.note("panel_dropped_rows", panel.dropped_rows);
  rd.phase("write");
  (void)opts;
  return {};
}

RunResult drive_train(RunDir& rd) {
  const WindowedDataset ds = acquire_dataset(rd.cfg);
  rd.phase("ingest");
  const TrainConfig tc = make_train_cfg(rd.cfg);
  const TrainReport rep = train_one(ds, tc);
  rd.phase("train");

  save_params(rep.best_params, (rd.dir() / "ckpt").string());
  rd.path("ckpt.json");
  rd.path("ckpt.bin");
  write_epochs_csv(rep, rd.path("epochs.csv"));
  if (!ds.rows_of(Split::test).empty() && rep.best_epoch > 0)
    write_test_preds_csv(rep.best_params, ds, rd.path("preds_test.csv"));

  Json j = report_to_json(rep);
  j["baselines"] = linear_baselines(ds);
  write_file(rd.path("report.json"), j.dump(2) + "\n");
  rd.note("result", j);
  rd.phase("write");
  if (rep.diverged) throw NumericError("train: run diverged");
  return {};
}

RunResult drive_sweep(RunDir& rd) {
  const WindowedDataset ds = acquire_dataset(rd.cfg);
  rd.phase("ingest");
  const TrainConfig base = make_train_cfg(rd.cfg);
  const SweepResult sw = sweep(ds, base, rd.cfg.train.sweep_trials, rd.cfg.seed);
  rd.phase("sweep");

  {
    CsvWriter w(rd.path("trials.csv"),
                {"trial", "lr", "weight_decay", "val_loss", "best_epoch",
                 "diverged"});
    for (std::size_t i = 0; i < sw.trials.size(); ++i) {
      const Trial& t = sw.trials[i];
      w.row({std::to_string(i), fmt_double(t.lr), fmt_double(t.weight_decay),
             fmt_or_nan(t.val_loss), std::to_string(t.best_epoch),
             t.diverged ? "1" : "0"});
    }
    w.close();
  }

  // Refit the winner on train+val for its early-stopped epoch count.
  const std::size_t refit_epochs = std::max<std::size_t>(
      1, sw.winner_report.best_epoch);
  const TrainReport refit = refit_final(ds, sw.winner_cfg, refit_epochs);
  rd.phase("refit");

  save_params(refit.best_params, (rd.dir() / "ckpt").string());
  rd.path("ckpt.json");
  rd.path("ckpt.bin");

  Json j;
  j["winner_trial"] = sw.winner_idx;
  j["winner_lr"] = sw.winner_cfg.opt.lr;
  j["winner_weight_decay"] = sw.winner_cfg.opt.weight_decay;
  j["winner_val_loss"] = sw.winner_report.best_val;
  j["refit_epochs"] = refit_epochs;
  j["refit"] = report_to_json(refit);
  write_file(rd.path("sweep.json"), j.dump(2) + "\n");
  rd.note("result", j);
  rd.phase("write");
  return {};
}

// Per-optimizer defaults for grid cells, sized for the desk-scale panel.
struct GridOpt {
  OptKind kind;
  double lr;
  double momentum;
  double weight_decay;
};
constexpr GridOpt kGridOpts[] = {
    {OptKind::SGD, 3e-2, 0.9, 0.0},
    {OptKind::Adam, 1e-3, 0.0, 0.0},
    {OptKind::Muon, 2e-2, 0.0, 0.0},
};
constexpr Arch kGridArchs[] = {Arch::MLP, Arch::CNN, Arch::LSTM,
                               Arch::Transformer};

struct GridCell {
  Arch arch;
  OptKind opt;
  MultiSeedResult result;
  std::string error;  // nonempty = failed
};

RunResult drive_grid(RunDir& rd, const RunOptions& opts) {
  const WindowedDataset ds = acquire_dataset(rd.cfg);
  rd.phase("ingest");

  std::vector<GridCell> cells;
  for (Arch a : kGridArchs)
    for (const GridOpt& g : kGridOpts) cells.push_back({a, g.kind, {}, ""});

  const auto run_cell = [&](GridCell& cell) {
    try {
      TrainConfig tc = make_train_cfg(rd.cfg);
      tc.model.arch = cell.arch;
      for (const GridOpt& g : kGridOpts)
        if (g.kind == cell.opt) {
          tc.opt.kind = g.kind;
          tc.opt.lr = g.lr;
          tc.opt.momentum = g.momentum;
          tc.opt.weight_decay = g.weight_decay;
        }
      cell.result = multi_seed(ds, tc, rd.cfg.train.n_seeds);
    } catch (const Error& e) {
      cell.error = e.what();
    }
  };

  const std::size_t jobs = std::max<std::size_t>(1, opts.jobs);
  if (jobs == 1) {
    for (GridCell& c : cells) run_cell(c);
  } else {
    // Bounded pool; cells are independent and results land in fixed slots,
    // so completion order never affects the artifacts.
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(jobs, cells.size()); ++w)
      pool.emplace_back([&]() {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= cells.size()) return;
          run_cell(cells[i]);
        }
      });
    for (std::thread& t : pool) t.join();
  }
  rd.phase("train");

  bool any_failed = false;
  {
    CsvWriter w(rd.path("grid.csv"),
                {"arch", "optimizer", "mean_nmse", "std_nmse", "seeds_ok",
                 "status"});
    for (const GridCell& c : cells) {
      const bool ok = c.error.empty();
      any_failed = any_failed || !ok;
      w.row({arch_name(c.arch), opt_name(c.opt),
             ok ? fmt_or_nan(c.result.mean_nmse) : "nan",
             ok ? fmt_or_nan(c.result.std_nmse) : "nan",
             ok ? std::to_string(c.result.n_ok) : "0",
             ok ? "ok" : "failed"});
    }
    w.close();
  }
  {
    CsvWriter w(rd.path("grid_seeds.csv"),
                {"arch", "optimizer", "seed", "test_nmse", "val_loss",
                 "best_epoch", "diverged"});
    for (const GridCell& c : cells)
      for (const SeedRun& r : c.result.runs)
        w.row({arch_name(c.arch), opt_name(c.opt),
               std::to_string(r.init_seed), fmt_or_nan(r.test_nmse),
               fmt_or_nan(r.val_loss), std::to_string(r.best_epoch),
               r.diverged ? "1" : "0"});
    w.close();
  }

  Json status = Json::array();
  for (const GridCell& c : cells) {
    Json s;
    s["arch"] = arch_name(c.arch);
    s["optimizer"] = opt_name(c.opt);
    s["status"] = c.error.empty() ? "ok" : "failed";
    if (!c.error.empty()) s["error"] = c.error;
    status.push_back(s);
  }
  rd.note("cells", status);
  rd.phase("write");

  RunResult res;
  res.exit_code = any_failed ? 4 : 0;
  return res;
}

Parameters load_ckpt_input(RunDir& rd, const std::string& path,
                           const std::string& label) {
  if (path.empty())
    throw ConfigError(label + ": checkpoint prefix required (--ckpt)");
  rd.input(label + "_json", sha256_file_hex(path + ".json"));
  rd.input(label + "_bin", sha256_file_hex(path + ".bin"));
  return load_params(path);
}

void write_surface_csv(const ResponseSurface& s, const std::string& path) {
  CsvWriter w(path, {"k", "delta", "value"});
  for (std::size_t ki = 0; ki < s.lags.size(); ++ki)
    for (std::size_t di = 0; di < s.deltas.size(); ++di)
      w.row({std::to_string(s.lags[ki]), fmt_double(s.deltas[di]),
             fmt_double(s.at(ki, di))});
  w.close();
}

std::vector<std::size_t> diag_lags(const RunConfig& cfg, std::size_t L) {
  if (!cfg.diag.lags.empty()) {
    for (std::size_t k : cfg.diag.lags)
      if (k >= L) throw ConfigError("diag.lags: lag out of range");
    return cfg.diag.lags;
  }
  std::vector<std::size_t> lags(L);
  for (std::size_t i = 0; i < L; ++i) lags[i] = i;
  return lags;
}

RunResult drive_diag_impulse(RunDir& rd, const RunOptions& opts) {
  const Parameters p = load_ckpt_input(rd, opts.ckpt, "model");
  const ModelPredictor f(p);
  const std::size_t k = opts.lag.value_or(0);
  const std::vector<double> deltas = delta_grid(
      rd.cfg.diag.delta_lo, rd.cfg.diag.delta_hi, rd.cfg.diag.delta_points);
  const std::vector<double> curve = impulse_response(f, k, deltas);
  rd.phase("probe");
  CsvWriter w(rd.path("impulse.csv"), {"k", "delta", "value"});
  for (std::size_t j = 0; j < deltas.size(); ++j)
    w.row({std::to_string(k), fmt_double(deltas[j]), fmt_double(curve[j])});
  w.close();
  rd.phase("write");
  return {};
}

RunResult drive_diag_surface(RunDir& rd, const RunOptions& opts) {
  const Parameters p = load_ckpt_input(rd, opts.ckpt, "model");
  const ModelPredictor f(p);
  const std::vector<double> deltas = delta_grid(
      rd.cfg.diag.delta_lo, rd.cfg.diag.delta_hi, rd.cfg.diag.delta_points);
  const ResponseSurface s =
      response_surface(f, diag_lags(rd.cfg, f.input_len()), deltas);
  rd.phase("probe");
  write_surface_csv(s, rd.path("surface.csv"));
  rd.phase("write");
  return {};
}

RunResult drive_diag_diff(RunDir& rd, const RunOptions& opts) {
  const Parameters pa = load_ckpt_input(rd, opts.ckpt, "model_a");
  const Parameters pb = load_ckpt_input(rd, opts.ckpt_b, "model_b");
  const ModelPredictor fa(pa), fb(pb);
  if (fa.input_len() != fb.input_len())
    throw ConfigError("diagnose diff: models disagree on input length");
  const std::vector<double> deltas = delta_grid(
      rd.cfg.diag.delta_lo, rd.cfg.diag.delta_hi, rd.cfg.diag.delta_points);
  const std::vector<std::size_t> lags = diag_lags(rd.cfg, fa.input_len());
  const DifferenceSurface d = difference_surface(
      response_surface(fa, lags, deltas), response_surface(fb, lags, deltas));
  rd.phase("probe");

  CsvWriter w(rd.path("diff.csv"), {"k", "delta", "value"});
  for (std::size_t ki = 0; ki < d.lags.size(); ++ki)
    for (std::size_t di = 0; di < d.deltas.size(); ++di)
      w.row({std::to_string(d.lags[ki]), fmt_double(d.deltas[di]),
             fmt_double(d.D[ki * d.deltas.size() + di])});
  w.close();
  Json j;
  j["planarity"] = d.planarity;
  write_file(rd.path("diff.json"), j.dump(2) + "\n");
  rd.note("result", j);
  rd.phase("write");
  return {};
}

RunResult drive_diag_shap(RunDir& rd, const RunOptions& opts) {
  const Parameters p = load_ckpt_input(rd, opts.ckpt, "model");
  const ModelPredictor f(p);
  const WindowedDataset ds = acquire_dataset(rd.cfg);
  if (ds.L != f.input_len())
    throw ConfigError("diagnose shap: dataset window length does not match "
                      "the checkpoint");
  rd.phase("ingest");

  const std::vector<std::size_t> test_rows = ds.rows_of(Split::test);
  if (test_rows.empty()) throw ConfigError("diagnose shap: empty test split");
  const std::size_t n =
      std::min(rd.cfg.diag.shap_rows, test_rows.size());
  std::vector<double> X(n * ds.L);
  for (std::size_t i = 0; i < n; ++i)
    std::copy(
        ds.X.v.begin() + static_cast<std::ptrdiff_t>(test_rows[i] * ds.L),
        ds.X.v.begin() + static_cast<std::ptrdiff_t>((test_rows[i] + 1) * ds.L),
        X.begin() + static_cast<std::ptrdiff_t>(i * ds.L));

  const AttributionReport rep = shapley_attribution(
      f, X.data(), n, rd.cfg.diag.shap_perms, rd.cfg.seed,
      rd.cfg.diag.shap_exact);
  rd.phase("attribute");

  CsvWriter w(rd.path("shap.csv"), {"lag", "mean_abs_phi", "stderr"});
  for (std::size_t k = 0; k < rep.mean_abs_phi.size(); ++k)
    w.row({std::to_string(k), fmt_double(rep.mean_abs_phi[k]),
           fmt_double(rep.stderr_phi[k])});
  w.close();
  Json j;
  j["rows"] = rep.n_rows;
  j["n_perm"] = rep.n_perm;
  j["exact"] = rep.exact;
  rd.note("result", j);
  rd.phase("write");
  return {};
}

RunResult drive_curvature_trace(RunDir& rd) {
  const WindowedDataset ds = acquire_dataset(rd.cfg);
  rd.phase("ingest");

  TraceConfig tc;
  tc.train = make_train_cfg(rd.cfg);
  tc.n_steps = rd.cfg.curvature.n_steps;
  tc.probe_every = rd.cfg.curvature.probe_every;
  tc.probe_rows = rd.cfg.curvature.probe_rows;
  tc.power_iters = rd.cfg.curvature.power_iters;
  tc.power_tol = rd.cfg.curvature.power_tol;
  tc.fd_eps = rd.cfg.curvature.fd_eps;
  const CurvatureTrace trace = curvature_trace(ds, tc);
  rd.phase("trace");

  CsvWriter w(rd.path("trace.csv"),
              {"step", "lambda_max", "batch_sharpness", "loss", "threshold"});
  const double thr = 2.0 / trace.eta;
  for (const TracePoint& pt : trace.points)
    w.row({std::to_string(pt.step), fmt_double(pt.lambda_max),
           fmt_double(pt.sharpness), fmt_double(pt.loss), fmt_double(thr)});
  w.close();

  Json j;
  j["eta"] = trace.eta;
  j["threshold"] = thr;
  j["diverged"] = trace.diverged;
  if (trace.eos_step)
    j["eos_step"] = *trace.eos_step;
  else
    j["eos_step"] = nullptr;
  write_file(rd.path("trace.json"), j.dump(2) + "\n");
  rd.note("result", j);
  rd.phase("write");
  return {};
}

RunResult drive_curvature_scaling(RunDir& rd) {
  const WindowedDataset ds = acquire_dataset(rd.cfg);
  rd.phase("ingest");
  const std::vector<std::size_t> rows_tr = ds.rows_of(Split::train);
  if (rows_tr.empty()) throw ConfigError("scaling: empty train split");

  const TrainConfig tc = make_train_cfg(rd.cfg);
  std::vector<double> fractions = rd.cfg.curvature.scaling_fractions;
  std::sort(fractions.begin(), fractions.end());

  std::vector<ScalingPoint> points;
  CsvWriter w(rd.path("scaling.csv"), {"dataset_size", "steps", "reached"});
  for (double f : fractions) {
    const std::size_t n = std::max<std::size_t>(
        tc.batch_size, static_cast<std::size_t>(
                           std::ceil(f * static_cast<double>(rows_tr.size()))));
    const std::vector<std::size_t> pool(
        rows_tr.begin(),
        rows_tr.begin() + static_cast<std::ptrdiff_t>(
                              std::min(n, rows_tr.size())));
    const auto steps = steps_to_target(
        ds, tc, pool, rd.cfg.curvature.scaling_target,
        rd.cfg.curvature.scaling_check_every, rd.cfg.curvature.scaling_max_steps);
    if (steps) {
      points.push_back({static_cast<double>(pool.size()),
                        static_cast<double>(std::max<std::int64_t>(1, *steps))});
      w.row({std::to_string(pool.size()), std::to_string(*steps), "1"});
    } else {
      w.row({std::to_string(pool.size()), "nan", "0"});
    }
  }
  w.close();
  rd.phase("measure");

  Json j;
  if (points.size() >= 2) {
    const ScalingFit fit = fit_scaling_law(points);
    j["beta"] = fit.beta;
    j["c"] = fit.c;
    j["log_c"] = fit.log_c;
    j["max_abs_resid"] = fit.max_abs_resid;
    if (rd.cfg.curvature.scaling_extrapolate > 0.0) {
      j["extrapolate_size"] = rd.cfg.curvature.scaling_extrapolate;
      j["extrapolated_steps"] =
          extrapolate_steps(fit, rd.cfg.curvature.scaling_extrapolate);
    }
  } else {
    j["error"] = "fewer than two sizes reached the target loss";
  }
  write_file(rd.path("scaling.json"), j.dump(2) + "\n");
  rd.note("result", j);
  rd.phase("write");
  if (points.size() < 2)
    throw NumericError("scaling: fewer than two sizes reached the target");
  return {};
}

RunResult drive_intervene(RunDir& rd) {
  const WindowedDataset ds = acquire_dataset(rd.cfg);
  rd.phase("ingest");

  InterventionConfig ic;
  ic.base = make_train_cfg(rd.cfg);
  ic.target_opt = rd.cfg.optim;
  ic.target_opt.kind = opt_from_name(rd.cfg.curvature.target_opt);
  ic.swap_step = rd.cfg.curvature.swap_step;
  ic.total_steps = rd.cfg.curvature.total_steps;
  const InterventionReport rep = run_intervention(ds, ic);
  rd.phase("train");

  const ModelPredictor fa(rep.swapped.params), fb(rep.scratch.params);
  const std::vector<double> deltas = delta_grid(
      rd.cfg.diag.delta_lo, rd.cfg.diag.delta_hi, rd.cfg.diag.delta_points);
  const std::vector<std::size_t> lags = diag_lags(rd.cfg, fa.input_len());
  const DifferenceSurface d = difference_surface(
      response_surface(fa, lags, deltas), response_surface(fb, lags, deltas));
  rd.phase("probe");

  CsvWriter w(rd.path("diff.csv"), {"k", "delta", "value"});
  for (std::size_t ki = 0; ki < d.lags.size(); ++ki)
    for (std::size_t di = 0; di < d.deltas.size(); ++di)
      w.row({std::to_string(d.lags[ki]), fmt_double(d.deltas[di]),
             fmt_double(d.D[ki * d.deltas.size() + di])});
  w.close();

  const auto arm_json = [](const InterventionArm& a) {
    Json j;
    j["train_loss"] = a.train_loss;
    j["val_loss"] = a.val_loss;
    j["diverged"] = a.diverged;
    return j;
  };
  Json j;
  j["donor"] = opt_name(ic.base.opt.kind);
  j["target"] = opt_name(ic.target_opt.kind);
  j["swap_step"] = ic.swap_step;
  j["total_steps"] = ic.total_steps;
  j["swapped"] = arm_json(rep.swapped);
  j["scratch"] = arm_json(rep.scratch);
  j["planarity"] = d.planarity;
  write_file(rd.path("intervene.json"), j.dump(2) + "\n");
  rd.note("result", j);
  rd.phase("write");
  return {};
}

RunResult drive_ensemble(RunDir& rd) {
  const WindowedDataset ds = acquire_dataset(rd.cfg);
  rd.phase("ingest");
  const std::vector<std::size_t> test_rows = ds.rows_of(Split::test);
  if (test_rows.empty()) throw ConfigError("ensemble: empty test split");
  std::vector<double> truth(test_rows.size());
  for (std::size_t i = 0; i < test_rows.size(); ++i)
    truth[i] = ds.y[test_rows[i]];

  std::vector<std::vector<double>> preds;
  std::vector<std::string> ids;
  for (std::size_t s = 0; s < rd.cfg.train.n_seeds; ++s) {
    TrainConfig tc = make_train_cfg(rd.cfg);
    tc.init_seed = rd.cfg.seed + s;
    tc.shuffle_seed = rd.cfg.seed + s;
    const TrainReport rep = train_one(ds, tc);
    if (rep.diverged || rep.best_epoch == 0) continue;  // skip dead members
    preds.push_back(predict_rows(rep.best_params, ds, test_rows));
    ids.push_back("seed" + std::to_string(tc.init_seed));
  }
  if (preds.empty()) throw NumericError("ensemble: every member diverged");
  rd.phase("train");

  const EnsembleReport rep = ensemble_report(preds, truth, ids);
  CsvWriter w(rd.path("members.csv"), {"member", "test_nmse"});
  for (std::size_t i = 0; i < rep.member_ids.size(); ++i)
    w.row({rep.member_ids[i], fmt_double(rep.member_nmse[i])});
  w.close();

  double mean_member = 0.0;
  for (double v : rep.member_nmse) mean_member += v;
  mean_member /= static_cast<double>(rep.member_nmse.size());
  Json j;
  j["members"] = rep.member_ids.size();
  j["ensemble_nmse"] = rep.ensemble_nmse;
  j["mean_member_nmse"] = mean_member;
  j["ambiguity"] = rep.ambiguity;
  write_file(rd.path("ensemble.json"), j.dump(2) + "\n");
  rd.note("result", j);
  rd.phase("write");
  return {};
}

// ============================================================================
// Portfolio driver
// ============================================================================

ForecastPanel load_forecast_panel(const std::string& forecasts_csv,
                                  const std::string& returns_csv,
                                  std::map<std::int64_t, std::string>& names) {
  const CsvTable ft = read_csv(forecasts_csv);
  const CsvTable rt = read_csv(returns_csv);
  const std::size_t fd = ft.col("date"), fa = ft.col("asset"),
                    ff = ft.col("forecast");
  const std::size_t rdc = rt.col("date"), rac = rt.col("asset"),
                    rrc = rt.col("ret");

  // Deterministic numeric ids from sorted asset names.
  std::vector<std::string> all_names;
  for (const auto& row : ft.rows) all_names.push_back(row[fa]);
  for (const auto& row : rt.rows) all_names.push_back(row[rac]);
  std::sort(all_names.begin(), all_names.end());
  all_names.erase(std::unique(all_names.begin(), all_names.end()),
                  all_names.end());
  std::map<std::string, std::int64_t> id_of;
  for (std::size_t i = 0; i < all_names.size(); ++i) {
    id_of[all_names[i]] = static_cast<std::int64_t>(i);
    names[static_cast<std::int64_t>(i)] = all_names[i];
  }

  std::map<std::int64_t, std::map<std::int64_t, double>> fmap, rmap;
  for (const auto& row : ft.rows) {
    const std::int64_t d = parse_date(row[fd]);
    const double v = std::stod(row[ff]);
    if (!(v > 0.0))
      throw SchemaError("portfolio: forecasts must be positive (date " +
                        row[fd] + ")");
    fmap[d][id_of[row[fa]]] = v;
  }
  for (const auto& row : rt.rows)
    rmap[parse_date(row[rdc])][id_of[row[rac]]] = std::stod(row[rrc]);

  ForecastPanel panel;
  for (auto it = fmap.begin(); it != fmap.end(); ++it) {
    // Returns realized on the next available return date after the forecast.
    auto nx = rmap.upper_bound(it->first);
    if (nx == rmap.end()) break;  // trailing forecasts rank nothing
    if (it->second.size() < static_cast<std::size_t>(kQuintiles)) {
      panel.skipped_dates += 1;
      continue;
    }
    ForecastDay day;
    day.date = it->first;
    for (const auto& [asset, fc] : it->second) {
      day.assets.push_back(asset);
      day.forecast.push_back(fc);
      const auto rit = nx->second.find(asset);
      day.next_ret.push_back(rit == nx->second.end()
                                 ? std::numeric_limits<double>::quiet_NaN()
                                 : rit->second);
    }
    panel.days.push_back(std::move(day));
  }
  return panel;
}

RunResult drive_portfolio(RunDir& rd, const RunOptions& opts) {
  const PortfolioSection& ps = rd.cfg.portfolio;
  if (ps.forecasts_csv.empty() || ps.returns_csv.empty())
    throw ConfigError("portfolio: forecasts_csv and returns_csv required");
  rd.input("forecasts_csv", sha256_file_hex(ps.forecasts_csv));
  rd.input("returns_csv", sha256_file_hex(ps.returns_csv));

  std::map<std::int64_t, std::string> names;
  const ForecastPanel panel =
      load_forecast_panel(ps.forecasts_csv, ps.returns_csv, names);
  if (panel.days.empty())
    throw SchemaError("portfolio: no usable rebalance dates");
  rd.phase("load");

  const std::size_t window = opts.window.value_or(ps.window);
  {
    CsvWriter w(rd.path("perf.csv"),
                {"quintile", "ann_return", "ann_vol", "sharpe", "max_drawdown",
                 "mean_turnover", "mean_turnover_target"});
    for (int q : ps.quintiles) {
      const PortfolioSeries s = portfolio_returns(panel, q - 1);
      const PerfSummary p = perf_summary(s);
      double tgt = 0.0;
      for (double t : s.turnover_target) tgt += t;
      if (!s.turnover_target.empty())
        tgt /= static_cast<double>(s.turnover_target.size());
      w.row({"Q" + std::to_string(q), fmt_double(p.ann_return),
             fmt_double(p.ann_vol), fmt_double(p.sharpe),
             fmt_double(p.max_drawdown), fmt_double(p.mean_turnover),
             fmt_double(tgt)});
    }
    w.close();
  }
  {
    const std::vector<std::pair<std::string, const ForecastPanel*>> models = {
        {"model", &panel}};
    const std::vector<FrontierRow> rows = frontier(models, ps.quintiles);
    CsvWriter w(rd.path("frontier.csv"),
                {"model", "quintile", "sharpe", "mean_turnover", "ann_return",
                 "ann_vol"});
    for (const FrontierRow& r : rows)
      w.row({r.model, "Q" + std::to_string(r.quintile), fmt_double(r.sharpe),
             fmt_double(r.mean_turnover), fmt_double(r.ann_return),
             fmt_double(r.ann_vol)});
    w.close();
  }
  {
    CsvWriter w(rd.path("rolling.csv"), {"quintile", "date", "rolling_turnover"});
    for (int q : ps.quintiles) {
      const PortfolioSeries s = portfolio_returns(panel, q - 1);
      if (s.turnover_drift.size() < window) continue;  // too short: no rows
      const std::vector<double> roll = rolling_turnover(s, window);
      for (std::size_t j = 0; j < roll.size(); ++j)
        w.row({"Q" + std::to_string(q), date_to_iso(s.dates[window + j]),
               fmt_double(roll[j])});
    }
    w.close();
  }
  Json j;
  j["dates"] = panel.days.size();
  j["skipped_dates"] = panel.skipped_dates;
  j["window"] = window;
  rd.note("result", j);
  rd.phase("write");
  return {};
}

}  // namespace

// ============================================================================
// Entry points
// ============================================================================

WindowedDataset acquire_dataset(const RunConfig& cfg) {
  const Panel panel = acquire_panel(cfg);
  return build_dataset(panel, cfg.ingest.pipeline);
}

RunResult run_subcommand(const std::string& name, const RunOptions& opts) {
  RunDir rd(name, opts);
  RunResult res;
  if (name == "synth") res = drive_synth(rd);
  else if (name == "ingest") res = drive_ingest(rd, opts);
  else if (name == "train") res = drive_train(rd);
  else if (name == "sweep") res = drive_sweep(rd);
  else if (name == "grid") res = drive_grid(rd, opts);
  else if (name == "diagnose-impulse") res = drive_diag_impulse(rd, opts);
  else if (name == "diagnose-surface") res = drive_diag_surface(rd, opts);
  else if (name == "diagnose-diff") res = drive_diag_diff(rd, opts);
  else if (name == "diagnose-shap") res = drive_diag_shap(rd, opts);
  else if (name == "curvature-trace") res = drive_curvature_trace(rd);
  else if (name == "curvature-scaling") res = drive_curvature_scaling(rd);
  else if (name == "intervene") res = drive_intervene(rd);
  else if (name == "ensemble") res = drive_ensemble(rd);
  else if (name == "portfolio") res = drive_portfolio(rd, opts);
  else throw ConfigError("unknown subcommand '" + name + "'");

  rd.finalize();
  res.run_dir = rd.dir().string();
  return res;
}

}  // namespace vollab
