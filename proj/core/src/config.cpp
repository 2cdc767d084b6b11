#include "vollab/config.hpp"

#include <fstream>
#include <sstream>

#include "json_util.hpp"
#include "vollab/sha256.hpp"

namespace vollab {

// ============================================================================
// Converters
// ============================================================================

Json model_to_json(const ModelConfig& m) {
  Json j;
  j["arch"] = arch_name(m.arch);
  j["L"] = m.L;
  j["mlp_hidden"] = m.mlp.hidden;
  j["cnn_channels"] = m.cnn.channels;
  j["cnn_kernel"] = m.cnn.kernel;
  j["cnn_padding"] = m.cnn.padding;
  j["cnn_pool"] = m.cnn.pool;
  j["cnn_head"] = m.cnn.head;
  j["lstm_layers"] = m.lstm.layers;
  j["lstm_hidden"] = m.lstm.hidden;
  j["tf_layers"] = m.tf.layers;
  j["tf_d_model"] = m.tf.d_model;
  j["tf_heads"] = m.tf.heads;
  j["tf_ff_mult"] = m.tf.ff_mult;
  j["tf_head"] = m.tf.head;
  return j;
}

ModelConfig model_from_json(const Json& j, const std::string& path) {
  ModelConfig m;
  StrictObj o(j, path);
  std::string arch = arch_name(m.arch);
  o.take("arch", arch);
  m.arch = arch_from_name(arch);
  o.take("L", m.L);
  o.take("mlp_hidden", m.mlp.hidden);
  o.take("cnn_channels", m.cnn.channels);
  o.take("cnn_kernel", m.cnn.kernel);
  o.take("cnn_padding", m.cnn.padding);
  o.take("cnn_pool", m.cnn.pool);
  o.take("cnn_head", m.cnn.head);
  o.take("lstm_layers", m.lstm.layers);
  o.take("lstm_hidden", m.lstm.hidden);
  o.take("tf_layers", m.tf.layers);
  o.take("tf_d_model", m.tf.d_model);
  o.take("tf_heads", m.tf.heads);
  o.take("tf_ff_mult", m.tf.ff_mult);
  o.take("tf_head", m.tf.head);
  o.finish();
  return m;
}

Json optim_to_json(const OptimizerConfig& o) {
  Json j;
  j["kind"] = opt_name(o.kind);
  j["lr"] = o.lr;
  j["weight_decay"] = o.weight_decay;
  j["momentum"] = o.momentum;
  j["beta1"] = o.beta1;
  j["beta2"] = o.beta2;
  j["eps"] = o.eps;
  j["muon_momentum"] = o.muon_momentum;
  j["ns_steps"] = o.ns_steps;
  return j;
}

OptimizerConfig optim_from_json(const Json& j, const std::string& path) {
  OptimizerConfig oc;
  StrictObj o(j, path);
  std::string kind = opt_name(oc.kind);
  o.take("kind", kind);
  oc.kind = opt_from_name(kind);
  o.take("lr", oc.lr);
  o.take("weight_decay", oc.weight_decay);
  o.take("momentum", oc.momentum);
  o.take("beta1", oc.beta1);
  o.take("beta2", oc.beta2);
  o.take("eps", oc.eps);
  o.take("muon_momentum", oc.muon_momentum);
  o.take("ns_steps", oc.ns_steps);
  o.finish();
  return oc;
}

namespace {

Json ingest_to_json(const IngestSection& s) {
  Json j;
  j["csv"] = s.csv;
  j["n_assets"] = s.n_assets;
  j["n_days"] = s.n_days;
  j["persistence"] = s.synth.persistence;
  j["shock"] = s.synth.shock;
  j["base_log_var"] = s.synth.base_log_var;
  j["intraday_steps"] = s.synth.intraday_steps;
  j["start_date"] = s.synth.start_date;
  j["L"] = s.pipeline.L;
  j["max_gap"] = s.pipeline.max_gap;
  j["q_low"] = s.pipeline.q_low;
  j["q_high"] = s.pipeline.q_high;
  j["var_floor"] = s.pipeline.var_floor;
  j["annualization"] = s.pipeline.annualization;
  return j;
}

IngestSection ingest_from_json(const Json& j) {
  IngestSection s;
  StrictObj o(j, "ingest");
  o.take("csv", s.csv);
  o.take("n_assets", s.n_assets);
  o.take("n_days", s.n_days);
  o.take("persistence", s.synth.persistence);
  o.take("shock", s.synth.shock);
  o.take("base_log_var", s.synth.base_log_var);
  o.take("intraday_steps", s.synth.intraday_steps);
  o.take("start_date", s.synth.start_date);
  o.take("L", s.pipeline.L);
  o.take("max_gap", s.pipeline.max_gap);
  o.take("q_low", s.pipeline.q_low);
  o.take("q_high", s.pipeline.q_high);
  o.take("var_floor", s.pipeline.var_floor);
  o.take("annualization", s.pipeline.annualization);
  o.finish();
  return s;
}

Json train_to_json(const TrainSection& s) {
  Json j;
  j["batch_size"] = s.batch_size;
  j["max_epochs"] = s.max_epochs;
  j["patience"] = s.patience;
  j["sweep_trials"] = s.sweep_trials;
  j["n_seeds"] = s.n_seeds;
  return j;
}

TrainSection train_from_json(const Json& j) {
  TrainSection s;
  StrictObj o(j, "train");
  o.take("batch_size", s.batch_size);
  o.take("max_epochs", s.max_epochs);
  o.take("patience", s.patience);
  o.take("sweep_trials", s.sweep_trials);
  o.take("n_seeds", s.n_seeds);
  o.finish();
  return s;
}

Json diag_to_json(const DiagSection& s) {
  Json j;
  j["delta_lo"] = s.delta_lo;
  j["delta_hi"] = s.delta_hi;
  j["delta_points"] = s.delta_points;
  j["lags"] = s.lags;
  j["shap_rows"] = s.shap_rows;
  j["shap_perms"] = s.shap_perms;
  j["shap_exact"] = s.shap_exact;
  return j;
}

DiagSection diag_from_json(const Json& j) {
  DiagSection s;
  StrictObj o(j, "diag");
  o.take("delta_lo", s.delta_lo);
  o.take("delta_hi", s.delta_hi);
  o.take("delta_points", s.delta_points);
  o.take("lags", s.lags);
  o.take("shap_rows", s.shap_rows);
  o.take("shap_perms", s.shap_perms);
  o.take("shap_exact", s.shap_exact);
  o.finish();
  return s;
}

Json curvature_to_json(const CurvatureSection& s) {
  Json j;
  j["n_steps"] = s.n_steps;
  j["probe_every"] = s.probe_every;
  j["probe_rows"] = s.probe_rows;
  j["power_iters"] = s.power_iters;
  j["power_tol"] = s.power_tol;
  j["fd_eps"] = s.fd_eps;
  j["scaling_fractions"] = s.scaling_fractions;
  j["scaling_target"] = s.scaling_target;
  j["scaling_check_every"] = s.scaling_check_every;
  j["scaling_max_steps"] = s.scaling_max_steps;
  j["scaling_extrapolate"] = s.scaling_extrapolate;
  j["target_opt"] = s.target_opt;
  j["swap_step"] = s.swap_step;
  j["total_steps"] = s.total_steps;
  return j;
}

CurvatureSection curvature_from_json(const Json& j) {
  CurvatureSection s;
  StrictObj o(j, "curvature");
  o.take("n_steps", s.n_steps);
  o.take("probe_every", s.probe_every);
  o.take("probe_rows", s.probe_rows);
  o.take("power_iters", s.power_iters);
  o.take("power_tol", s.power_tol);
  o.take("fd_eps", s.fd_eps);
  o.take("scaling_fractions", s.scaling_fractions);
  o.take("scaling_target", s.scaling_target);
  o.take("scaling_check_every", s.scaling_check_every);
  o.take("scaling_max_steps", s.scaling_max_steps);
  o.take("scaling_extrapolate", s.scaling_extrapolate);
  o.take("target_opt", s.target_opt);
  o.take("swap_step", s.swap_step);
  o.take("total_steps", s.total_steps);
  o.finish();
  return s;
}

Json portfolio_to_json(const PortfolioSection& s) {
  Json j;
  j["forecasts_csv"] = s.forecasts_csv;
  j["returns_csv"] = s.returns_csv;
  j["window"] = s.window;
  j["quintiles"] = s.quintiles;
  return j;
}

PortfolioSection portfolio_from_json(const Json& j) {
  PortfolioSection s;
  StrictObj o(j, "portfolio");
  o.take("forecasts_csv", s.forecasts_csv);
  o.take("returns_csv", s.returns_csv);
  o.take("window", s.window);
  o.take("quintiles", s.quintiles);
  o.finish();
  return s;
}

}  // namespace

Json run_config_to_json(const RunConfig& cfg) {
  Json j;
  j["seed"] = cfg.seed;
  j["ingest"] = ingest_to_json(cfg.ingest);
  j["model"] = model_to_json(cfg.model);
  j["optim"] = optim_to_json(cfg.optim);
  j["train"] = train_to_json(cfg.train);
  j["diag"] = diag_to_json(cfg.diag);
  j["curvature"] = curvature_to_json(cfg.curvature);
  j["portfolio"] = portfolio_to_json(cfg.portfolio);
  return j;
}

// ============================================================================
// Parsing
// ============================================================================

void RunConfig::validate() const {
  model.validate();
  optim.validate();
  if (train.batch_size == 0) throw ConfigError("config: train.batch_size must be >= 1");
  if (train.max_epochs == 0) throw ConfigError("config: train.max_epochs must be >= 1");
  if (train.patience == 0) throw ConfigError("config: train.patience must be >= 1");
  if (diag.delta_points < 2) throw ConfigError("config: diag.delta_points must be >= 2");
  if (!(diag.delta_hi > diag.delta_lo))
    throw ConfigError("config: diag.delta_hi must exceed diag.delta_lo");
  for (double f : curvature.scaling_fractions)
    if (!(f > 0.0) || f > 1.0)
      throw ConfigError("config: curvature.scaling_fractions must lie in (0, 1]");
  for (int q : portfolio.quintiles)
    if (q < 1 || q > 5)
      throw ConfigError("config: portfolio.quintiles entries must be 1..5");
}

RunConfig parse_run_config(const std::string& json_text,
                           const std::string& origin) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config: " + origin + ": " + e.what());
  }
  if (!j.is_object())
    throw ConfigError("config: " + origin + ": top level must be an object");

  RunConfig cfg;
  StrictObj top(j, "");
  top.take("seed", cfg.seed);
  cfg.ingest = ingest_from_json(top.section("ingest"));
  cfg.model = model_from_json(top.section("model"), "model");
  cfg.optim = optim_from_json(top.section("optim"), "optim");
  cfg.train = train_from_json(top.section("train"));
  cfg.diag = diag_from_json(top.section("diag"));
  cfg.curvature = curvature_from_json(top.section("curvature"));
  cfg.portfolio = portfolio_from_json(top.section("portfolio"));
  top.finish();

  // The model always consumes windows of the ingest length.
  cfg.model.L = cfg.ingest.pipeline.L;
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path);
}

std::string effective_config_json(const RunConfig& cfg) {
  return run_config_to_json(cfg).dump(2);
}

std::string config_hash(const RunConfig& cfg) {
  return sha256_hex(effective_config_json(cfg) + "\n#seed=" +
                    std::to_string(cfg.seed));
}

}  // namespace vollab
