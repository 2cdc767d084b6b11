#pragma once
// One structured run-config file binds the whole workflow. Parsing is strict:
// unknown keys are rejected by full path, every field has a documented
// default, and the effective (defaults-resolved) config can be re-serialized
// canonically for manifests and content hashing.

#include <cstdint>
#include <string>
#include <vector>

#include "vollab/ingest.hpp"
#include "vollab/model.hpp"
#include "vollab/optim.hpp"

namespace vollab {

// `ingest.*`: data source and windowing pipeline.
struct IngestSection {
  std::string csv;            // bar CSV path; empty = synthesize
  std::size_t n_assets = 20;  // synthetic panel width
  std::size_t n_days = 1500;  // synthetic panel length
  SynthParams synth;
  IngestConfig pipeline;      // L, max_gap, quantiles, floor, annualization
};

// `train.*`: loop sizes shared by train/sweep/grid.
struct TrainSection {
  std::size_t batch_size = 512;
  std::size_t max_epochs = 50;
  std::size_t patience = 10;
  std::size_t sweep_trials = 25;
  std::size_t n_seeds = 13;
};

// `diag.*`: probe grids and attribution sampling.
struct DiagSection {
  double delta_lo = -4.0;
  double delta_hi = 4.0;
  std::size_t delta_points = 81;
  std::vector<std::size_t> lags;  // empty = all lags
  std::size_t shap_rows = 64;
  std::size_t shap_perms = 64;
  bool shap_exact = false;
};

// `curvature.*`: trace, scaling study, and intervention settings.
struct CurvatureSection {
  std::int64_t n_steps = 200;
  std::int64_t probe_every = 50;
  std::size_t probe_rows = 4096;
  std::size_t power_iters = 60;
  double power_tol = 1e-4;
  double fd_eps = 1e-4;
  std::vector<double> scaling_fractions = {0.125, 0.25, 0.5, 1.0};
  double scaling_target = 0.7;        // train-loss level defining "reached"
  std::int64_t scaling_check_every = 50;
  std::int64_t scaling_max_steps = 20000;
  double scaling_extrapolate = 0.0;   // dataset size to extrapolate to; 0 = off
  std::string target_opt = "sgd";     // optimizer after the swap
  std::int64_t swap_step = 500;
  std::int64_t total_steps = 1000;
};

// `portfolio.*`: forecast/return inputs and turnover windows.
struct PortfolioSection {
  std::string forecasts_csv;
  std::string returns_csv;
  std::size_t window = 126;
  std::vector<int> quintiles = {1, 5};
};

struct RunConfig {
  std::uint64_t seed = 1;
  IngestSection ingest;
  ModelConfig model;      // `model.*`; L is taken from ingest.L
  OptimizerConfig optim;  // `optim.*`
  TrainSection train;
  DiagSection diag;
  CurvatureSection curvature;
  PortfolioSection portfolio;

  void validate() const;
};

// Parses strict JSON. `origin` names the source (file path) in diagnostics.
// Unknown keys raise ConfigError with the full dotted path.
RunConfig parse_run_config(const std::string& json_text,
                           const std::string& origin);
RunConfig load_run_config(const std::string& path);

// Canonical (sorted-key, defaults-resolved) serialization of the effective
// config; identical configs serialize identically.
std::string effective_config_json(const RunConfig& cfg);

// SHA-256 of the effective config combined with the seed; names run
// directories.
std::string config_hash(const RunConfig& cfg);

}  // namespace vollab
