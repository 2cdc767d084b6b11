// ============================================================================
// vollab — command-line front end
//
// Every subcommand reads one JSON config, runs the corresponding pipeline,
// and writes its artifacts into a content-addressed directory under --out.
// Exit codes: 0 success, 2 configuration/usage error, 3 numeric failure,
// 4 partial grid failure.
// ============================================================================

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "vollab/common.hpp"
#include "vollab/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vollab: desk-scale volatility forecasting laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", vollab::kVersion);

  vollab::RunOptions opts;
  std::uint64_t seed = 0;
  std::size_t lag = 0;
  std::size_t window = 0;
  std::string picked;

  app.add_option("--config", opts.config_path,
                 "Run configuration JSON (omit for defaults)");
  CLI::Option* seed_opt =
      app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--out", opts.out_root, "Root directory for run outputs")
      ->capture_default_str();
  app.add_option("--jobs", opts.jobs, "Worker threads for grid cells")
      ->capture_default_str();

  const auto leaf = [&](CLI::App* parent, const std::string& cli_name,
                        const std::string& canonical, const std::string& help) {
    CLI::App* sub = parent->add_subcommand(cli_name, help);
    sub->fallthrough();
    sub->callback([&picked, canonical]() { picked = canonical; });
    return sub;
  };

  leaf(&app, "synth", "synth", "Synthesize an OHLC bar panel and write it as CSV");
  leaf(&app, "ingest", "ingest",
       "Build the windowed dataset (targets, winsorize, z-score, split)");
  leaf(&app, "train", "train",
       "Train one model with early stopping; write checkpoint and report");
  leaf(&app, "sweep", "sweep",
       "Random hyperparameter search, then refit the winner on train+val");
  leaf(&app, "grid", "grid",
       "Architecture x optimizer grid with multi-seed replication");

  CLI::App* diag = app.add_subcommand("diagnose", "Functional probes of trained models");
  diag->require_subcommand(1);
  diag->fallthrough();
  CLI::Option* lag_opt =
      leaf(diag, "impulse", "diagnose-impulse",
           "Single-lag impulse response curve")
          ->add_option("--lag", lag, "Lag index to shock");
  leaf(diag, "surface", "diagnose-surface", "Full lag x shock response surface");
  leaf(diag, "diff", "diagnose-diff",
       "Difference surface between two checkpoints, with planarity score");
  leaf(diag, "shap", "diagnose-shap",
       "Sampled-permutation Shapley attribution over test rows");
  for (CLI::App* sub : diag->get_subcommands(nullptr)) {
    sub->add_option("--ckpt", opts.ckpt, "Checkpoint prefix (no extension)");
    if (sub->get_name() == "diff")
      sub->add_option("--ckpt-b", opts.ckpt_b, "Second checkpoint prefix");
  }

  CLI::App* curv = app.add_subcommand("curvature", "Loss-curvature studies");
  curv->require_subcommand(1);
  curv->fallthrough();
  leaf(curv, "trace", "curvature-trace",
       "Per-step lambda_max / batch-sharpness trace against 2/eta");
  leaf(curv, "scaling", "curvature-scaling",
       "Steps-to-target-loss power law across dataset sizes");

  leaf(&app, "intervene", "intervene",
       "Mid-run optimizer swap (hard reset) vs. from-scratch control");
  leaf(&app, "ensemble", "ensemble",
       "Seed ensemble with the ambiguity decomposition");
  CLI::Option* window_opt =
      leaf(&app, "portfolio", "portfolio",
           "Quintile portfolio backtest from forecast and return CSVs")
          ->add_option("--window", window, "Rolling turnover window (days)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (seed_opt->count() > 0) opts.seed = seed;
  if (lag_opt->count() > 0) opts.lag = lag;
  if (window_opt->count() > 0) opts.window = window;

  try {
    const vollab::RunResult res = vollab::run_subcommand(picked, opts);
    std::cout << res.run_dir << "\n";
    return res.exit_code == 0 ? kExitOk : res.exit_code;
  } catch (const vollab::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const vollab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}
