// The training loop: deterministic batch stream, resumable step runner,
// early stopping and checkpoint bookkeeping, the normalized test score,
// hyperparameter sweeps, and multi-seed aggregation.

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <doctest.h>

#include "test_util.hpp"
#include "vollab/common.hpp"
#include "vollab/train.hpp"

using namespace vollab;

namespace {

TrainConfig quick_cfg(const WindowedDataset& ds, OptKind kind = OptKind::Adam,
                      double lr = 3e-3) {
  TrainConfig cfg;
  cfg.model = testutil::tiny_mlp(ds.L);
  cfg.opt.kind = kind;
  cfg.opt.lr = lr;
  cfg.batch_size = 32;
  cfg.max_epochs = 8;
  cfg.patience = 3;
  cfg.init_seed = 3;
  cfg.shuffle_seed = 3;
  return cfg;
}

// Recomputes the running-best / early-stop bookkeeping from the epoch log and
// checks the report against it.
void check_stopping_invariants(const TrainReport& rep, std::size_t patience,
                               std::size_t max_epochs) {
  REQUIRE(!rep.epochs.empty());
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0, since_best = 0;
  for (std::size_t e = 1; e <= rep.epochs.size(); ++e) {
    const double v = rep.epochs[e - 1].val_loss;
    if (v < best) {
      best = v;
      best_epoch = e;
      since_best = 0;
    } else {
      ++since_best;
    }
    // The loop can only continue past e if the stop rule has not fired.
    if (e < rep.epochs.size()) CHECK(since_best < patience);
  }
  CHECK(rep.best_epoch == best_epoch);
  CHECK(rep.best_val == best);
  if (rep.epochs.size() < max_epochs && !rep.diverged)
    CHECK(since_best >= patience);  // stopped early for exactly this reason
}

}  // namespace

// ============================================================================
// Batch stream
// ============================================================================

TEST_CASE("each epoch's batches partition the rows exactly once") {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < 11; ++i) rows.push_back(100 + i);
  const std::size_t bs = 4;
  REQUIRE(steps_per_epoch(rows.size(), bs) == 3);

  for (std::int64_t epoch = 0; epoch < 3; ++epoch) {
    std::vector<std::size_t> seen;
    std::vector<std::size_t> sizes;
    for (std::int64_t s = 0; s < 3; ++s) {
      const auto b = batch_at_step(rows, bs, 9, epoch * 3 + s);
      sizes.push_back(b.size());
      seen.insert(seen.end(), b.begin(), b.end());
    }
    CHECK(sizes == std::vector<std::size_t>{4, 4, 3});  // short tail kept
    std::sort(seen.begin(), seen.end());
    CHECK(seen == rows);
  }
}

TEST_CASE("the batch stream is a pure function of its arguments") {
  std::vector<std::size_t> rows(50);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  CHECK(batch_at_step(rows, 16, 7, 4) == batch_at_step(rows, 16, 7, 4));
  CHECK(batch_at_step(rows, 16, 7, 4) != batch_at_step(rows, 16, 8, 4));

  // Epochs are shuffled independently: the first batch changes across epochs.
  const auto e0 = batch_at_step(rows, 16, 7, 0);
  const auto e1 = batch_at_step(rows, 16, 7, 4);  // 4 steps/epoch
  CHECK(e0 != e1);
}

TEST_CASE("ceil division for steps per epoch") {
  CHECK(steps_per_epoch(10, 3) == 4);
  CHECK(steps_per_epoch(9, 3) == 3);
  CHECK(steps_per_epoch(2, 512) == 1);
  CHECK(steps_per_epoch(1, 1) == 1);
}

// ============================================================================
// Resumable step runner
// ============================================================================

TEST_CASE("splitting a run into segments reproduces the unsplit run") {
  const WindowedDataset ds = testutil::tiny_dataset();
  const auto rows = ds.rows_of(Split::train);
  OptimizerConfig opt;
  opt.kind = OptKind::Adam;
  opt.lr = 1e-3;

  Parameters a = init_params(testutil::tiny_mlp(ds.L), 5);
  OptimizerState sa = OptimizerState::zeros_like(a);
  run_steps(ds, a, sa, opt, rows, 16, 10, 42);

  Parameters b = init_params(testutil::tiny_mlp(ds.L), 5);
  OptimizerState sb = OptimizerState::zeros_like(b);
  run_steps(ds, b, sb, opt, rows, 16, 3, 42);
  run_steps(ds, b, sb, opt, rows, 16, 7, 42);  // resumes at step_count = 3

  CHECK(a.step_count == 10);
  CHECK(b.step_count == 10);
  CHECK(a.flatten() == b.flatten());
}

TEST_CASE("the hook sees pre-update parameters and the matching batch loss") {
  const WindowedDataset ds = testutil::tiny_dataset();
  const auto rows = ds.rows_of(Split::train);
  OptimizerConfig opt;
  opt.kind = OptKind::SGD;
  opt.lr = 1e-3;

  Parameters p = init_params(testutil::tiny_mlp(ds.L), 5);
  const std::vector<double> init_theta = p.flatten();
  OptimizerState st = OptimizerState::zeros_like(p);

  std::vector<std::int64_t> steps_seen;
  run_steps(ds, p, st, opt, rows, 16, 3, 42,
            [&](std::int64_t step, const Parameters& cur, double batch_loss) {
              steps_seen.push_back(step);
              if (step == 0) CHECK(cur.flatten() == init_theta);
              const auto batch = batch_at_step(rows, 16, 42, step);
              CHECK(batch_loss ==
                    doctest::Approx(loss_on_rows(cur, ds, batch)).epsilon(1e-14));
            });
  CHECK(steps_seen == std::vector<std::int64_t>{0, 1, 2});
}

// ============================================================================
// Normalized mean squared error
// ============================================================================

TEST_CASE("nmse hand example: off-by-one forecasts on a spread-two target") {
  // Targets (0, 2), forecasts (1, 1): mse = 1, population variance = 1.
  CHECK(nmse({1.0, 1.0}, {0.0, 2.0}) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("nmse is zero for perfect forecasts and one for the mean forecast") {
  const std::vector<double> y{0.5, -1.0, 2.0, 0.25};
  CHECK(nmse(y, y) == 0.0);
  const double ybar = testutil::mean_of(y);
  CHECK(nmse({ybar, ybar, ybar, ybar}, y) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("nmse rejects constant targets") {
  CHECK_THROWS_AS(nmse({1.0, 2.0}, {3.0, 3.0}), NumericError);
}

// ============================================================================
// Full training runs
// ============================================================================

TEST_CASE("training runs are deterministic end to end") {
  const WindowedDataset ds = testutil::tiny_dataset();
  const TrainConfig cfg = quick_cfg(ds);
  const TrainReport a = train_one(ds, cfg);
  const TrainReport b = train_one(ds, cfg);
  REQUIRE(a.epochs.size() == b.epochs.size());
  for (std::size_t e = 0; e < a.epochs.size(); ++e) {
    CHECK(a.epochs[e].train_loss == b.epochs[e].train_loss);
    CHECK(a.epochs[e].val_loss == b.epochs[e].val_loss);
  }
  CHECK(a.best_val == b.best_val);
  CHECK(a.best_params.flatten() == b.best_params.flatten());
  REQUIRE(a.test_nmse.has_value());
  CHECK(*a.test_nmse == *b.test_nmse);
}

TEST_CASE("the checkpoint really is the best-validation snapshot") {
  const WindowedDataset ds = testutil::tiny_dataset();
  for (std::size_t patience : {std::size_t{1}, std::size_t{3}}) {
    TrainConfig cfg = quick_cfg(ds);
    cfg.patience = patience;
    cfg.max_epochs = 10;
    const TrainReport rep = train_one(ds, cfg);
    REQUIRE_FALSE(rep.diverged);
    check_stopping_invariants(rep, cfg.patience, cfg.max_epochs);

    // Re-scoring the checkpoint on the validation split recovers best_val.
    CHECK(loss_on_rows(rep.best_params, ds, ds.rows_of(Split::val)) ==
          rep.best_val);
    // And the recorded test score comes from that same checkpoint.
    const auto rows_te = ds.rows_of(Split::test);
    std::vector<double> truth(rows_te.size());
    for (std::size_t i = 0; i < rows_te.size(); ++i) truth[i] = ds.y[rows_te[i]];
    CHECK(*rep.test_nmse ==
          doctest::Approx(nmse(predict_rows(rep.best_params, ds, rows_te), truth))
              .epsilon(1e-14));
  }
}

TEST_CASE("test-split targets cannot influence the checkpoint") {
  WindowedDataset ds = testutil::tiny_dataset();
  const TrainConfig cfg = quick_cfg(ds);
  const TrainReport before = train_one(ds, cfg);

  for (std::size_t r = 0; r < ds.n_rows(); ++r)
    if (ds.split[r] == static_cast<std::uint8_t>(Split::test)) ds.y[r] += 10.0;
  const TrainReport after = train_one(ds, cfg);

  CHECK(after.best_params.flatten() == before.best_params.flatten());
  CHECK(after.best_val == before.best_val);
  CHECK(*after.test_nmse != *before.test_nmse);  // only the score moves
}

TEST_CASE("training requires nonempty train and validation splits") {
  WindowedDataset ds = testutil::tiny_dataset();
  for (auto& s : ds.split)
    if (s == static_cast<std::uint8_t>(Split::val))
      s = static_cast<std::uint8_t>(Split::train);
  CHECK_THROWS_AS(train_one(ds, quick_cfg(ds)), ConfigError);
}

TEST_CASE("refit trains on train plus validation for a fixed epoch count") {
  const WindowedDataset ds = testutil::tiny_dataset();
  TrainConfig cfg = quick_cfg(ds);
  const TrainReport rep = refit_final(ds, cfg, 4);
  REQUIRE_FALSE(rep.diverged);
  CHECK(rep.epochs.size() == 4);  // no early stopping
  CHECK(rep.best_epoch == 4);     // final parameters, not a val checkpoint
  for (const auto& e : rep.epochs) CHECK(std::isnan(e.val_loss));
  REQUIRE(rep.test_nmse.has_value());

  // More pooled rows than the train split alone: more steps per epoch.
  const std::size_t pooled =
      ds.count_of(Split::train) + ds.count_of(Split::val);
  CHECK(steps_per_epoch(pooled, cfg.batch_size) >
        steps_per_epoch(ds.count_of(Split::train), cfg.batch_size));
  CHECK_THROWS_AS(refit_final(ds, cfg, 0), ConfigError);
}

TEST_CASE("a blow-up learning rate is reported as divergence, not a throw") {
  const WindowedDataset ds = testutil::tiny_dataset();
  TrainConfig cfg = quick_cfg(ds, OptKind::SGD, 1e6);
  const TrainReport rep = train_one(ds, cfg);
  CHECK(rep.diverged);
}

// ============================================================================
// Hyperparameter sweep
// ============================================================================

TEST_CASE("sampling respects each optimizer family's search box") {
  for (OptKind kind : {OptKind::SGD, OptKind::Adam, OptKind::Muon}) {
    const HyperRange hr = hyper_range(kind);
    Rng rng(19, 7);
    bool low_half = false, high_half = false;
    const double lr_mid = std::sqrt(hr.lr_lo * hr.lr_hi);
    for (int i = 0; i < 200; ++i) {
      const auto [lr, wd] = sample_hyper(kind, rng);
      CHECK(lr >= hr.lr_lo);
      CHECK(lr <= hr.lr_hi);
      CHECK(wd >= hr.wd_lo);
      CHECK(wd <= hr.wd_hi);
      low_half |= lr < lr_mid;
      high_half |= lr >= lr_mid;
    }
    CHECK(low_half);  // log-uniform draws visit both decades
    CHECK(high_half);
  }
}

TEST_CASE("the sweep ranks non-diverged trials by validation loss") {
  const WindowedDataset ds = testutil::tiny_dataset();
  TrainConfig base = quick_cfg(ds);
  base.max_epochs = 3;
  base.patience = 2;
  const SweepResult sr = sweep(ds, base, 5, 11);
  REQUIRE(sr.trials.size() == 5);

  const HyperRange hr = hyper_range(base.opt.kind);
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_idx = 0;
  bool found = false;
  for (std::size_t i = 0; i < sr.trials.size(); ++i) {
    const Trial& t = sr.trials[i];
    CHECK(t.lr >= hr.lr_lo);
    CHECK(t.lr <= hr.lr_hi);
    if (t.diverged) continue;
    if (!found || t.val_loss < best ||
        (t.val_loss == best && t.lr < sr.trials[best_idx].lr)) {
      best = t.val_loss;
      best_idx = i;
      found = true;
    }
  }
  REQUIRE(found);
  CHECK(sr.winner_idx == best_idx);
  CHECK(sr.winner_cfg.opt.lr == sr.trials[best_idx].lr);
  CHECK(sr.winner_cfg.opt.weight_decay == sr.trials[best_idx].weight_decay);
  CHECK(sr.winner_report.best_val == best);

  // The winner's report is reproducible from its configuration.
  const TrainReport redo = train_one(ds, sr.winner_cfg);
  CHECK(redo.best_val == sr.winner_report.best_val);
  CHECK(redo.best_params.flatten() == sr.winner_report.best_params.flatten());
}

// ============================================================================
// Multi-seed replication
// ============================================================================

TEST_CASE("seed replication aggregates with the sample standard deviation") {
  const WindowedDataset ds = testutil::tiny_dataset();
  TrainConfig cfg = quick_cfg(ds);
  cfg.max_epochs = 3;
  cfg.init_seed = 100;
  cfg.shuffle_seed = 100;
  const MultiSeedResult ms = multi_seed(ds, cfg, 3);
  REQUIRE(ms.runs.size() == 3);
  REQUIRE(ms.n_ok == 3);

  std::set<double> distinct;
  double sum = 0.0;
  for (std::size_t s = 0; s < 3; ++s) {
    CHECK(ms.runs[s].init_seed == 100 + s);
    CHECK(ms.runs[s].shuffle_seed == 100 + s);
    sum += ms.runs[s].test_nmse;
    distinct.insert(ms.runs[s].test_nmse);
  }
  CHECK(distinct.size() == 3);  // seeds genuinely vary the outcome
  const double mean = sum / 3.0;
  double ss = 0.0;
  for (const auto& r : ms.runs) ss += (r.test_nmse - mean) * (r.test_nmse - mean);
  CHECK(ms.mean_nmse == doctest::Approx(mean).epsilon(1e-15));
  CHECK(ms.std_nmse == doctest::Approx(std::sqrt(ss / 2.0)).epsilon(1e-12));
}
