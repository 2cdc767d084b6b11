// Architecture configuration, parameter initialization, counts, optimizer
// matrix flags, and the flatten/unflatten round trip.

#include <cmath>

#include <doctest.h>

#include "test_util.hpp"
#include "vollab/common.hpp"
#include "vollab/model.hpp"

using namespace vollab;

// ============================================================================
// Parameter counts
// ============================================================================

TEST_CASE("default configurations have the documented scalar counts") {
  ModelConfig m;
  m.arch = Arch::MLP;
  CHECK(param_count(m) == 281857);
  m.arch = Arch::CNN;
  CHECK(param_count(m) == 2557889);
  m.arch = Arch::LSTM;
  CHECK(param_count(m) == 789761);
  m.arch = Arch::Transformer;
  CHECK(param_count(m) == 434689);
}

TEST_CASE("tiny configurations count by hand") {
  // MLP 12 -> 8 -> 4 -> 1: (12*8+8) + (8*4+4) + (4+1).
  CHECK(param_count(testutil::tiny_mlp()) == 145);
  // CNN: conv (9+3) + (36+4), head 16*6+6, out 6+1.
  CHECK(param_count(testutil::tiny_cnn()) == 161);
  // LSTM: (24+144+24) + (144+144+24) + (6+1).
  CHECK(param_count(testutil::tiny_lstm()) == 511);
  // Transformer: emb 16 + pos 64 + 2*600 + final LN 16 + head 54 + out 7.
  CHECK(param_count(testutil::tiny_tf()) == 1357);
}

TEST_CASE("count helper agrees with materialized parameters") {
  for (const auto& cfg : testutil::tiny_all())
    CHECK(param_count(cfg) == init_params(cfg, 3).n_scalars());
}

TEST_CASE("conv trunk length shrinks by kernel-1-2*padding per block") {
  ModelConfig m;
  m.arch = Arch::CNN;
  CHECK(m.cnn_trunk_len() == 85);  // 100 -> 95 -> 90 -> 85 with k=8, pad=1
  CHECK(testutil::tiny_cnn().cnn_trunk_len() == 12);  // k=3, pad=1: unchanged
}

// ============================================================================
// Initialization
// ============================================================================

TEST_CASE("initialization is deterministic in the seed") {
  for (const auto& cfg : testutil::tiny_all()) {
    const Parameters a = init_params(cfg, 7);
    const Parameters b = init_params(cfg, 7);
    const Parameters c = init_params(cfg, 8);
    REQUIRE(a.items.size() == b.items.size());
    bool equal = true, differs = false;
    for (std::size_t i = 0; i < a.items.size(); ++i) {
      equal &= a.items[i].t.v == b.items[i].t.v;
      differs |= a.items[i].t.v != c.items[i].t.v;
    }
    CHECK(equal);
    CHECK(differs);
    CHECK(a.init_seed == 7);
    CHECK(a.step_count == 0);
  }
}

TEST_CASE("biases start at zero and layer-norm gains at one") {
  const Parameters p = init_params(testutil::tiny_tf(), 5);
  for (const auto& it : p.items) {
    const bool is_bias = it.name.size() >= 2 &&
                         it.name.compare(it.name.size() - 2, 2, ".b") == 0;
    const bool is_gain = it.name.size() >= 2 &&
                         it.name.compare(it.name.size() - 2, 2, ".g") == 0;
    if (is_bias)
      for (double x : it.t.v) CHECK(x == 0.0);
    if (is_gain)
      for (double x : it.t.v) CHECK(x == 1.0);
  }
}

TEST_CASE("weights are fan-in bounded and positional table is small") {
  const Parameters p = init_params(testutil::tiny_mlp(), 11);
  const Tensor& w0 = p.tensor("fc0.w");
  REQUIRE(w0.shape == std::vector<std::size_t>{12, 8});
  const double bound = 1.0 / std::sqrt(12.0);
  bool nonzero = false;
  for (double x : w0.v) {
    CHECK(std::fabs(x) <= bound);
    nonzero |= x != 0.0;
  }
  CHECK(nonzero);

  const Parameters q = init_params(testutil::tiny_tf(), 11);
  for (double x : q.tensor("pos").v) CHECK(std::fabs(x) <= 0.02);
}

TEST_CASE("default MLP input layer maps 100 lags to 512 units") {
  ModelConfig m;
  m.arch = Arch::MLP;
  const Parameters p = init_params(m, 1);
  CHECK(p.tensor("fc0.w").shape == std::vector<std::size_t>{100, 512});
  CHECK(p.tensor("fc0.b").shape == std::vector<std::size_t>{512});
}

// ============================================================================
// Optimizer matrix flags
// ============================================================================

TEST_CASE("genuine matrices are flagged, vector-like tensors are not") {
  const Parameters mlp = init_params(testutil::tiny_mlp(), 1);
  CHECK(mlp.items[mlp.index_of("fc0.w")].muon_matrix);
  CHECK_FALSE(mlp.items[mlp.index_of("fc0.b")].muon_matrix);
  // Output weight has a single column: element-wise treatment.
  CHECK_FALSE(mlp.items[mlp.index_of("out.w")].muon_matrix);

  const Parameters lstm = init_params(testutil::tiny_lstm(), 1);
  // First-layer input map has one row (scalar series in).
  CHECK_FALSE(lstm.items[lstm.index_of("lstm0.wx")].muon_matrix);
  CHECK(lstm.items[lstm.index_of("lstm0.wh")].muon_matrix);
  CHECK(lstm.items[lstm.index_of("lstm1.wx")].muon_matrix);

  const Parameters tf = init_params(testutil::tiny_tf(), 1);
  CHECK_FALSE(tf.items[tf.index_of("emb.w")].muon_matrix);
  CHECK_FALSE(tf.items[tf.index_of("pos")].muon_matrix);
  CHECK(tf.items[tf.index_of("tf0.wq.w")].muon_matrix);
  CHECK(tf.items[tf.index_of("tf0.ff1.w")].muon_matrix);
  CHECK_FALSE(tf.items[tf.index_of("lnf.g")].muon_matrix);
}

// ============================================================================
// Flatten round trip
// ============================================================================

TEST_CASE("flatten and unflatten are exact inverses") {
  for (const auto& cfg : testutil::tiny_all()) {
    Parameters p = init_params(cfg, 13);
    const std::vector<double> theta = p.flatten();
    REQUIRE(theta.size() == p.n_scalars());

    Parameters q = init_params(cfg, 14);  // different values, same shapes
    q.unflatten(theta);
    for (std::size_t i = 0; i < p.items.size(); ++i)
      CHECK(q.items[i].t.v == p.items[i].t.v);
  }
}

TEST_CASE("unflatten rejects a wrong-length vector") {
  Parameters p = init_params(testutil::tiny_mlp(), 1);
  std::vector<double> theta = p.flatten();
  theta.push_back(0.0);
  CHECK_THROWS_AS(p.unflatten(theta), ShapeError);
}

TEST_CASE("tensor lookup by name throws for unknown names") {
  const Parameters p = init_params(testutil::tiny_mlp(), 1);
  CHECK_THROWS_AS(p.index_of("nope"), ShapeError);
}

// ============================================================================
// Validation
// ============================================================================

TEST_CASE("configuration validation rejects inconsistent dimensions") {
  ModelConfig m = testutil::tiny_tf();
  m.tf.heads = 3;  // does not divide d_model = 8
  CHECK_THROWS_AS(m.validate(), ConfigError);

  ModelConfig c = testutil::tiny_cnn();
  c.cnn.pool = 50;  // longer than the 12-step trunk
  CHECK_THROWS_AS(c.validate(), ConfigError);

  ModelConfig z = testutil::tiny_mlp();
  z.L = 0;
  CHECK_THROWS_AS(z.validate(), ConfigError);
}

TEST_CASE("architecture names round-trip") {
  for (Arch a : {Arch::MLP, Arch::CNN, Arch::LSTM, Arch::Transformer})
    CHECK(arch_from_name(arch_name(a)) == a);
  CHECK_THROWS_AS(arch_from_name("perceptron"), ConfigError);
}
