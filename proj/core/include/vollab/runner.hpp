#pragma once
// Subcommand drivers: each one acquires its inputs, runs the corresponding
// core operations, and writes artifacts (CSV/JSON plus a manifest) into a
// content-addressed run directory under the output root. Wall-clock timings
// go to a separate file so artifact bytes depend only on config and inputs.

#include <cstdint>
#include <optional>
#include <string>

#include "vollab/config.hpp"

namespace vollab {

struct RunOptions {
  std::string config_path;           // empty = all defaults
  std::string out_root = "runs";
  std::optional<std::uint64_t> seed; // overrides config seed
  std::size_t jobs = 1;              // worker pool width for grid cells

  // Inputs for checkpoint-consuming subcommands.
  std::string ckpt;    // diagnose impulse/surface/shap, ensemble seed model
  std::string ckpt_b;  // second model for diagnose diff
  std::optional<std::size_t> lag;     // diagnose impulse
  std::optional<std::size_t> window;  // portfolio rolling window override
};

struct RunResult {
  int exit_code = 0;  // 0 ok, 4 = some grid cells failed
  std::string run_dir;
};

// name: synth | ingest | train | sweep | grid | diagnose-impulse |
// diagnose-surface | diagnose-diff | diagnose-shap | curvature-trace |
// curvature-scaling | intervene | ensemble | portfolio.
// Throws ConfigError/IoError/SchemaError (exit 2) or NumericError (exit 3);
// partial grid failure is reported via exit_code 4 with per-cell statuses in
// the artifacts.
RunResult run_subcommand(const std::string& name, const RunOptions& opts);

// Builds (or synthesizes) the panel named by the config and windows it.
WindowedDataset acquire_dataset(const RunConfig& cfg);

}  // namespace vollab
