#pragma once
// Model configurations and the named-tensor parameter store for the four
// forecasting architectures. Every architecture maps a length-L standardized
// lag vector to one scalar forecast.

#include <cstdint>
#include <string>
#include <vector>

#include "vollab/tensor.hpp"

namespace vollab {

enum class Arch { MLP, CNN, LSTM, Transformer };

std::string arch_name(Arch a);
Arch arch_from_name(const std::string& s);

struct MlpDims {
  // Hidden widths; an empty list degenerates to a pure affine model, which
  // the intervention sanity checks rely on.
  std::vector<std::size_t> hidden = {512, 256, 256, 128};
};

struct CnnDims {
  std::vector<std::size_t> channels = {64, 128, 256};
  std::size_t kernel = 8;
  std::size_t padding = 1;  // shrinks length by kernel - 1 - 2*padding per block
  std::size_t pool = 16;    // adaptive average-pool output length
  std::vector<std::size_t> head = {512, 256};
};

struct LstmDims {
  std::size_t layers = 2;
  std::size_t hidden = 256;  // readout: last step's top-layer hidden state
};

struct TfDims {
  std::size_t layers = 2;
  std::size_t d_model = 128;
  std::size_t heads = 8;
  std::size_t ff_mult = 4;   // feed-forward width = ff_mult * d_model
  std::vector<std::size_t> head = {128, 64};
};

struct ModelConfig {
  Arch arch = Arch::MLP;
  std::size_t L = 100;
  MlpDims mlp;
  CnnDims cnn;
  LstmDims lstm;
  TfDims tf;

  // Throws ConfigError on inconsistent dimensions (heads not dividing
  // d_model, conv stack shrinking below the pool length, ...).
  void validate() const;

  // Sequence length after the conv stack (CNN only).
  std::size_t cnn_trunk_len() const;
};

struct NamedTensor {
  std::string name;
  Tensor t;
  // Marks tensors the matrix-orthogonalizing optimizer treats as matrices;
  // everything else falls back to element-wise adaptive updates.
  bool muon_matrix = false;
};

struct Parameters {
  ModelConfig cfg;
  std::uint64_t init_seed = 0;
  std::int64_t step_count = 0;  // optimizer steps taken so far
  std::vector<NamedTensor> items;

  std::size_t n_tensors() const { return items.size(); }
  std::size_t n_scalars() const;
  std::size_t index_of(const std::string& name) const;  // throws if absent
  const Tensor& tensor(const std::string& name) const {
    return items[index_of(name)].t;
  }
  Tensor& tensor(const std::string& name) { return items[index_of(name)].t; }

  // Flat parameter vector round-trip (fixed tensor order); the curvature
  // probes live in this flattened coordinate system.
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& theta);
};

// Deterministic initialization: fan-in-scaled uniform weights, zero biases,
// unit layer-norm gains, small-uniform positional embeddings.
Parameters init_params(const ModelConfig& cfg, std::uint64_t seed);

// Total scalar parameter count for a configuration without training it.
std::size_t param_count(const ModelConfig& cfg);

}  // namespace vollab
