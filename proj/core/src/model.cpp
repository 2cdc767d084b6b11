#include "vollab/model.hpp"

#include <cmath>

#include "vollab/rng.hpp"

namespace vollab {

std::string arch_name(Arch a) {
  switch (a) {
    case Arch::MLP: return "mlp";
    case Arch::CNN: return "cnn";
    case Arch::LSTM: return "lstm";
    case Arch::Transformer: return "transformer";
  }
  throw ConfigError("unknown architecture tag");
}

Arch arch_from_name(const std::string& s) {
  if (s == "mlp") return Arch::MLP;
  if (s == "cnn") return Arch::CNN;
  if (s == "lstm") return Arch::LSTM;
  if (s == "transformer") return Arch::Transformer;
  throw ConfigError("unknown architecture '" + s + "'");
}

std::size_t ModelConfig::cnn_trunk_len() const {
  std::size_t len = L;
  for (std::size_t i = 0; i < cnn.channels.size(); ++i) {
    const std::size_t padded = len + 2 * cnn.padding;
    if (padded < cnn.kernel)
      throw ConfigError("cnn: sequence shorter than kernel at block " +
                        std::to_string(i));
    len = padded - cnn.kernel + 1;
  }
  return len;
}

void ModelConfig::validate() const {
  if (L < 1) throw ConfigError("model: L must be >= 1");
  switch (arch) {
    case Arch::MLP:
      for (auto h : mlp.hidden)
        if (h < 1) throw ConfigError("mlp: hidden widths must be positive");
      break;
    case Arch::CNN: {
      if (cnn.channels.empty()) throw ConfigError("cnn: need >= 1 conv block");
      for (auto c : cnn.channels)
        if (c < 1) throw ConfigError("cnn: channels must be positive");
      if (cnn.kernel < 1) throw ConfigError("cnn: kernel must be positive");
      if (cnn.pool < 1) throw ConfigError("cnn: pool length must be positive");
      const std::size_t len = cnn_trunk_len();
      if (len < cnn.pool)
        throw ConfigError("cnn: trunk length " + std::to_string(len) +
                          " shorter than pool " + std::to_string(cnn.pool));
      break;
    }
    case Arch::LSTM:
      if (lstm.layers < 1 || lstm.hidden < 1)
        throw ConfigError("lstm: layers and hidden must be positive");
      break;
    case Arch::Transformer:
      if (tf.layers < 1 || tf.d_model < 1 || tf.heads < 1 || tf.ff_mult < 1)
        throw ConfigError("transformer: dims must be positive");
      if (tf.d_model % tf.heads != 0)
        throw ConfigError("transformer: heads must divide d_model");
      break;
  }
}

std::size_t Parameters::n_scalars() const {
  std::size_t n = 0;
  for (const auto& it : items) n += it.t.numel();
  return n;
}

std::size_t Parameters::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < items.size(); ++i)
    if (items[i].name == name) return i;
  throw ShapeError("no parameter tensor named '" + name + "'");
}

std::vector<double> Parameters::flatten() const {
  std::vector<double> theta;
  theta.reserve(n_scalars());
  for (const auto& it : items)
    theta.insert(theta.end(), it.t.v.begin(), it.t.v.end());
  return theta;
}

void Parameters::unflatten(const std::vector<double>& theta) {
  if (theta.size() != n_scalars())
    throw ShapeError("flat parameter vector has wrong length");
  std::size_t off = 0;
  for (auto& it : items) {
    std::copy(theta.begin() + off, theta.begin() + off + it.t.numel(),
              it.t.v.begin());
    off += it.t.numel();
  }
}

// ============================================================================
// Initialization
// ============================================================================

namespace {

// Builder collecting tensors in checkpoint order with one shared RNG.
struct ParamBuilder {
  Parameters p;
  Rng rng;

  ParamBuilder(const ModelConfig& cfg, std::uint64_t seed)
      : rng(seed, 0x1417) {
    p.cfg = cfg;
    p.init_seed = seed;
  }

  // Fan-in-scaled uniform weights: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  void weight(const std::string& name, std::vector<std::size_t> shape,
              std::size_t fan_in, bool muon) {
    NamedTensor nt{name, Tensor(std::move(shape)), muon};
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& x : nt.t.v) x = rng.uniform(-bound, bound);
    p.items.push_back(std::move(nt));
  }

  void constant(const std::string& name, std::vector<std::size_t> shape,
                double value) {
    NamedTensor nt{name, Tensor(std::move(shape)), false};
    nt.t.fill(value);
    p.items.push_back(std::move(nt));
  }

  void small_uniform(const std::string& name, std::vector<std::size_t> shape,
                     double bound) {
    NamedTensor nt{name, Tensor(std::move(shape)), false};
    for (auto& x : nt.t.v) x = rng.uniform(-bound, bound);
    p.items.push_back(std::move(nt));
  }

  // A (in, out) linear layer; the matrix flag is dropped when either side is
  // degenerate (vector-like maps get element-wise optimizer treatment).
  void linear(const std::string& stem, std::size_t in, std::size_t out) {
    weight(stem + ".w", {in, out}, in, in > 1 && out > 1);
    constant(stem + ".b", {out}, 0.0);
  }
};

void build_mlp(ParamBuilder& b, const ModelConfig& cfg) {
  std::size_t in = cfg.L;
  for (std::size_t i = 0; i < cfg.mlp.hidden.size(); ++i) {
    b.linear("fc" + std::to_string(i), in, cfg.mlp.hidden[i]);
    in = cfg.mlp.hidden[i];
  }
  b.linear("out", in, 1);
}

void build_cnn(ParamBuilder& b, const ModelConfig& cfg) {
  std::size_t in_ch = 1;
  for (std::size_t i = 0; i < cfg.cnn.channels.size(); ++i) {
    const std::size_t out_ch = cfg.cnn.channels[i];
    const std::size_t fan_in = in_ch * cfg.cnn.kernel;
    b.weight("conv" + std::to_string(i) + ".w", {out_ch, in_ch, cfg.cnn.kernel},
             fan_in, out_ch > 1 && fan_in > 1);
    b.constant("conv" + std::to_string(i) + ".b", {out_ch}, 0.0);
    in_ch = out_ch;
  }
  std::size_t in = cfg.cnn.channels.back() * cfg.cnn.pool;
  for (std::size_t i = 0; i < cfg.cnn.head.size(); ++i) {
    b.linear("head" + std::to_string(i), in, cfg.cnn.head[i]);
    in = cfg.cnn.head[i];
  }
  b.linear("out", in, 1);
}

void build_lstm(ParamBuilder& b, const ModelConfig& cfg) {
  const std::size_t H = cfg.lstm.hidden;
  std::size_t in = 1;
  for (std::size_t l = 0; l < cfg.lstm.layers; ++l) {
    const std::string stem = "lstm" + std::to_string(l);
    // Gate order along the 4H axis: input, forget, cell, output.
    b.weight(stem + ".wx", {in, 4 * H}, in, in > 1);
    b.weight(stem + ".wh", {H, 4 * H}, H, H > 1);
    b.constant(stem + ".b", {4 * H}, 0.0);
    in = H;
  }
  b.linear("out", H, 1);
}

void build_transformer(ParamBuilder& b, const ModelConfig& cfg) {
  const std::size_t d = cfg.tf.d_model;
  const std::size_t ff = cfg.tf.ff_mult * d;
  b.linear("emb", 1, d);
  // Learned positional table; never treated as a matrix by the optimizer.
  b.small_uniform("pos", {cfg.L, d}, 0.02);
  for (std::size_t l = 0; l < cfg.tf.layers; ++l) {
    const std::string stem = "tf" + std::to_string(l);
    b.constant(stem + ".ln1.g", {d}, 1.0);
    b.constant(stem + ".ln1.b", {d}, 0.0);
    b.linear(stem + ".wq", d, d);
    b.linear(stem + ".wk", d, d);
    b.linear(stem + ".wv", d, d);
    b.linear(stem + ".wo", d, d);
    b.constant(stem + ".ln2.g", {d}, 1.0);
    b.constant(stem + ".ln2.b", {d}, 0.0);
    b.linear(stem + ".ff1", d, ff);
    b.linear(stem + ".ff2", ff, d);
  }
  b.constant("lnf.g", {d}, 1.0);
  b.constant("lnf.b", {d}, 0.0);
  std::size_t in = d;
  for (std::size_t i = 0; i < cfg.tf.head.size(); ++i) {
    b.linear("head" + std::to_string(i), in, cfg.tf.head[i]);
    in = cfg.tf.head[i];
  }
  b.linear("out", in, 1);
}

}  // namespace

Parameters init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParamBuilder b(cfg, seed);
  switch (cfg.arch) {
    case Arch::MLP: build_mlp(b, cfg); break;
    case Arch::CNN: build_cnn(b, cfg); break;
    case Arch::LSTM: build_lstm(b, cfg); break;
    case Arch::Transformer: build_transformer(b, cfg); break;
  }
  return std::move(b.p);
}

std::size_t param_count(const ModelConfig& cfg) {
  return init_params(cfg, 0).n_scalars();
}

}  // namespace vollab
