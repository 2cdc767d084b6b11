#pragma once
// Mini-batch training: a step-granular runner that can resume mid-stream, an
// epoch loop with patience-based early stopping and best-validation
// checkpointing, hyperparameter sweeps, final refits, and multi-seed
// replication.

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "vollab/engine.hpp"
#include "vollab/ingest.hpp"
#include "vollab/model.hpp"
#include "vollab/optim.hpp"
#include "vollab/rng.hpp"

namespace vollab {

struct TrainConfig {
  ModelConfig model;
  OptimizerConfig opt;
  std::size_t batch_size = 512;
  std::size_t max_epochs = 50;
  std::size_t patience = 10;  // epochs without strict val improvement
  std::uint64_t init_seed = 1;
  std::uint64_t shuffle_seed = 1;

  void validate() const;
};

// Called once per step, before the optimizer update, with the number of steps
// completed so far, the current parameters, and the loss of the batch about
// to be applied.
using StepHook =
    std::function<void(std::int64_t step, const Parameters&, double batch_loss)>;

struct StepRunResult {
  std::int64_t steps_done = 0;
  bool diverged = false;
};

// The mini-batch taken at a given global step. The stream is a deterministic
// function of (shuffle_seed, rows, batch_size): epoch e is `rows` shuffled
// with Rng(shuffle_seed, e+1), cut into consecutive batches (final short
// batch kept).
std::vector<std::size_t> batch_at_step(const std::vector<std::size_t>& rows,
                                       std::size_t batch_size,
                                       std::uint64_t shuffle_seed,
                                       std::int64_t step);

// Advances training by n_steps mini-batch steps over `rows`, taking batch
// batch_at_step(rows, batch_size, shuffle_seed, step) at each step. Resumes
// from params.step_count, so splitting a run into segments reproduces the
// unsplit sequence exactly. A non-finite loss, gradient, or parameter stops
// the run with diverged = true.
StepRunResult run_steps(const WindowedDataset& ds, Parameters& params,
                        OptimizerState& state, const OptimizerConfig& opt,
                        const std::vector<std::size_t>& rows,
                        std::size_t batch_size, std::int64_t n_steps,
                        std::uint64_t shuffle_seed, const StepHook& hook = {});

std::size_t steps_per_epoch(std::size_t n_rows, std::size_t batch_size);

struct EpochRecord {
  double train_loss = 0.0;  // weighted mean of batch losses seen this epoch
  double val_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 = no completed epoch
  double best_val = std::numeric_limits<double>::infinity();
  Parameters best_params;      // snapshot at best_epoch (init if none)
  std::optional<double> test_nmse;
  bool diverged = false;
  double wall_seconds = 0.0;   // bookkeeping only; never hashed
};

// Full training run on the train split with per-epoch validation, strict-
// improvement early stopping, and best-epoch checkpointing. Computes test
// NMSE from the checkpoint if the test split is nonempty.
TrainReport train_one(const WindowedDataset& ds, const TrainConfig& cfg,
                      const StepHook& hook = {});

// Trains on train+validation combined for exactly n_epochs (no early
// stopping), then scores the final parameters on the test split.
TrainReport refit_final(const WindowedDataset& ds, const TrainConfig& cfg,
                        std::size_t n_epochs);

// Mean squared error of pred against y, normalized by the population variance
// of y. Throws NumericError when the target is constant.
double nmse(const std::vector<double>& pred, const std::vector<double>& y);

// ============================================================================
// Hyperparameter sweep
// ============================================================================

struct HyperRange {
  double lr_lo, lr_hi, wd_lo, wd_hi;
};

// Log-uniform sampling boxes per optimizer family.
HyperRange hyper_range(OptKind kind);

// Draws (lr, weight_decay) log-uniformly from the family's range.
std::pair<double, double> sample_hyper(OptKind kind, Rng& rng);

struct Trial {
  double lr = 0.0;
  double weight_decay = 0.0;
  double val_loss = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  bool diverged = false;
};

struct SweepResult {
  std::vector<Trial> trials;
  std::size_t winner_idx = 0;
  TrainConfig winner_cfg;
  TrainReport winner_report;
};

// Random search over (lr, weight_decay): n_trials draws, each trained with
// train_one. Diverged trials are recorded but excluded from the ranking;
// ties on validation loss resolve to the lower learning rate. Throws
// NumericError when every trial diverges.
SweepResult sweep(const WindowedDataset& ds, const TrainConfig& base,
                  std::size_t n_trials = 25, std::uint64_t sweep_seed = 0);

// ============================================================================
// Multi-seed replication
// ============================================================================

struct SeedRun {
  std::uint64_t init_seed = 0;
  std::uint64_t shuffle_seed = 0;
  double test_nmse = std::numeric_limits<double>::quiet_NaN();
  double val_loss = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  bool diverged = false;
};

struct MultiSeedResult {
  std::vector<SeedRun> runs;
  double mean_nmse = std::numeric_limits<double>::quiet_NaN();
  double std_nmse = std::numeric_limits<double>::quiet_NaN();  // sample std
  std::size_t n_ok = 0;
};

// Repeats train_one with seeds base+0 .. base+n_seeds-1 (applied to both init
// and shuffle streams) and aggregates test NMSE across non-diverged runs.
MultiSeedResult multi_seed(const WindowedDataset& ds, const TrainConfig& cfg,
                           std::size_t n_seeds = 13);

}  // namespace vollab
