// Run-config parsing: documented defaults, strict unknown-key rejection with
// full dotted paths, canonical effective serialization, and content hashing.

#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "vollab/common.hpp"
#include "vollab/config.hpp"

using namespace vollab;

namespace {

// Parses and reports the ConfigError message, or an empty string on success.
std::string parse_error_of(const std::string& text) {
  try {
    (void)parse_run_config(text, "test");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

bool mentions(const std::string& msg, const std::string& needle) {
  return msg.find(needle) != std::string::npos;
}

}  // namespace

// ============================================================================
// Defaults
// ============================================================================

TEST_CASE("an empty config resolves to the documented defaults") {
  const RunConfig cfg = parse_run_config("{}", "test");

  CHECK(cfg.seed == 1);

  CHECK(cfg.ingest.csv.empty());
  CHECK(cfg.ingest.n_assets == 20);
  CHECK(cfg.ingest.n_days == 1500);
  CHECK(cfg.ingest.pipeline.L == 100);
  CHECK(cfg.ingest.pipeline.max_gap == 10);
  CHECK(cfg.ingest.pipeline.q_low == 0.005);
  CHECK(cfg.ingest.pipeline.q_high == 0.995);
  CHECK(cfg.ingest.pipeline.annualization == 252.0);

  CHECK(cfg.model.arch == Arch::MLP);
  CHECK(cfg.model.L == 100);

  CHECK(cfg.optim.kind == OptKind::Adam);
  CHECK(cfg.optim.lr == 1e-3);
  CHECK(cfg.optim.weight_decay == 0.0);
  CHECK(cfg.optim.beta1 == 0.9);
  CHECK(cfg.optim.beta2 == 0.999);
  CHECK(cfg.optim.eps == 1e-8);
  CHECK(cfg.optim.muon_momentum == 0.95);
  CHECK(cfg.optim.ns_steps == 5);

  CHECK(cfg.train.batch_size == 512);
  CHECK(cfg.train.max_epochs == 50);
  CHECK(cfg.train.patience == 10);
  CHECK(cfg.train.sweep_trials == 25);
  CHECK(cfg.train.n_seeds == 13);

  CHECK(cfg.diag.delta_lo == -4.0);
  CHECK(cfg.diag.delta_hi == 4.0);
  CHECK(cfg.diag.delta_points == 81);
  CHECK(cfg.diag.lags.empty());
  CHECK(cfg.diag.shap_rows == 64);
  CHECK(cfg.diag.shap_perms == 64);
  CHECK(cfg.diag.shap_exact == false);

  CHECK(cfg.curvature.n_steps == 200);
  CHECK(cfg.curvature.probe_every == 50);
  CHECK(cfg.curvature.probe_rows == 4096);
  CHECK(cfg.curvature.power_iters == 60);
  CHECK(cfg.curvature.power_tol == 1e-4);
  CHECK(cfg.curvature.scaling_fractions ==
        std::vector<double>{0.125, 0.25, 0.5, 1.0});
  CHECK(cfg.curvature.scaling_target == 0.7);
  CHECK(cfg.curvature.scaling_check_every == 50);
  CHECK(cfg.curvature.scaling_max_steps == 20000);
  CHECK(cfg.curvature.target_opt == "sgd");
  CHECK(cfg.curvature.swap_step == 500);
  CHECK(cfg.curvature.total_steps == 1000);

  CHECK(cfg.portfolio.window == 126);
  CHECK(cfg.portfolio.quintiles == std::vector<int>{1, 5});
}

TEST_CASE("explicit values override defaults without touching the rest") {
  const RunConfig cfg = parse_run_config(
      R"({"seed": 9, "train": {"batch_size": 64},
          "optim": {"kind": "muon", "lr": 0.02}})",
      "test");
  CHECK(cfg.seed == 9);
  CHECK(cfg.train.batch_size == 64);
  CHECK(cfg.train.max_epochs == 50);
  CHECK(cfg.optim.kind == OptKind::Muon);
  CHECK(cfg.optim.lr == 0.02);
  CHECK(cfg.optim.muon_momentum == 0.95);
}

TEST_CASE("the model consumes windows of the ingest length") {
  const RunConfig a = parse_run_config(R"({"ingest": {"L": 12}})", "test");
  CHECK(a.model.L == 12);
  // An explicit model.L is overridden: one window length drives everything.
  const RunConfig b = parse_run_config(
      R"({"ingest": {"L": 12}, "model": {"L": 50}})", "test");
  CHECK(b.model.L == 12);
}

// ============================================================================
// Strict parsing
// ============================================================================

TEST_CASE("unknown keys are rejected by full dotted path") {
  CHECK(mentions(parse_error_of(R"({"trian": {}})"), "'trian'"));
  CHECK(mentions(parse_error_of(R"({"train": {"patiense": 3}})"),
                 "'train.patiense'"));
  CHECK(mentions(parse_error_of(R"({"curvature": {"probes": 1}})"),
                 "'curvature.probes'"));
  CHECK(mentions(parse_error_of(R"({"model": {"depth": 2}})"),
                 "'model.depth'"));
  CHECK(mentions(parse_error_of(R"({"ingest": {"max_gaps": 3}})"),
                 "'ingest.max_gaps'"));
}

TEST_CASE("wrong value types are rejected with the offending path") {
  CHECK(mentions(parse_error_of(R"({"train": {"batch_size": "big"}})"),
                 "'train.batch_size'"));
  CHECK(mentions(parse_error_of(R"({"train": {"batch_size": -4}})"),
                 "'train.batch_size'"));
  CHECK(mentions(parse_error_of(R"({"diag": {"delta_lo": "left"}})"),
                 "'diag.delta_lo'"));
  CHECK(mentions(parse_error_of(R"({"diag": {"lags": 3}})"), "'diag.lags'"));
  CHECK(mentions(parse_error_of(R"({"diag": {"shap_exact": 1}})"),
                 "'diag.shap_exact'"));
  CHECK(mentions(parse_error_of(R"({"curvature": {"target_opt": 7}})"),
                 "'curvature.target_opt'"));
  // Array elements are named with their index.
  CHECK(mentions(
      parse_error_of(R"({"curvature": {"scaling_fractions": [0.5, "x"]}})"),
      "'curvature.scaling_fractions[1]'"));
}

TEST_CASE("malformed or mis-shaped documents are config errors") {
  CHECK_THROWS_AS(parse_run_config("{not json", "test"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[1, 2]", "test"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"train": 5})", "test"), ConfigError);
}

TEST_CASE("semantic validation runs after parsing") {
  CHECK_THROWS_AS(parse_run_config(R"({"train": {"batch_size": 0}})", "test"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"train": {"patience": 0}})", "test"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"diag": {"delta_points": 1}})", "test"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(
                      R"({"diag": {"delta_lo": 2.0, "delta_hi": -2.0}})",
                      "test"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(
                      R"({"curvature": {"scaling_fractions": [0.5, 1.5]}})",
                      "test"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"portfolio": {"quintiles": [0]}})",
                                   "test"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"portfolio": {"quintiles": [6]}})",
                                   "test"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"model": {"arch": "gru"}})", "test"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"optim": {"kind": "rmsprop"}})", "test"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"optim": {"lr": -0.1}})", "test"),
                  ConfigError);
}

// ============================================================================
// Canonical serialization and hashing
// ============================================================================

TEST_CASE("equivalent configs serialize to identical effective text") {
  const RunConfig a = parse_run_config("{}", "test");
  // Spell out a default explicitly and reorder sections; the effective form
  // must not notice.
  const RunConfig b = parse_run_config(
      R"({"train": {"batch_size": 512}, "seed": 1})", "test");
  CHECK(effective_config_json(a) == effective_config_json(b));
  CHECK(config_hash(a) == config_hash(b));

  // The effective text re-parses to the same effective text (fixed point).
  const RunConfig c = parse_run_config(effective_config_json(a), "test");
  CHECK(effective_config_json(c) == effective_config_json(a));
}

TEST_CASE("the effective config spells out every default") {
  const std::string text = effective_config_json(parse_run_config("{}", "t"));
  CHECK(mentions(text, "\"probe_every\": 50"));
  CHECK(mentions(text, "\"delta_points\": 81"));
  CHECK(mentions(text, "\"n_seeds\": 13"));
  CHECK(mentions(text, "\"window\": 126"));
  CHECK(mentions(text, "\"kind\": \"adam\""));
}

TEST_CASE("the run hash separates configs and seeds") {
  const RunConfig a = parse_run_config("{}", "test");
  RunConfig b = a;
  b.seed = 2;
  RunConfig c = a;
  c.train.patience = 11;

  const std::string ha = config_hash(a);
  CHECK(ha.size() == 64);
  CHECK(ha.find_first_not_of("0123456789abcdef") == std::string::npos);
  CHECK(ha != config_hash(b));
  CHECK(ha != config_hash(c));
  CHECK(ha == config_hash(a));
}

// ============================================================================
// File loading
// ============================================================================

TEST_CASE("configs load from disk with the path in diagnostics") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() /
                        ("vollab_cfg_" + std::to_string(::getpid()) + ".json");
  {
    std::ofstream out(path);
    out << R"({"seed": 123, "train": {"max_epochs": 7}})";
  }
  const RunConfig cfg = load_run_config(path.string());
  CHECK(cfg.seed == 123);
  CHECK(cfg.train.max_epochs == 7);
  fs::remove(path);

  CHECK_THROWS_AS(load_run_config((path.parent_path() / "absent.json").string()),
                  IoError);
}
