#pragma once
// First-order optimizers sharing one step interface: SGD with momentum, Adam,
// and a momentum-orthogonalization scheme that replaces each matrix update
// with an approximate orthogonal factor (Newton-Schulz iteration). All three
// apply weight decay in decoupled form.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vollab/engine.hpp"
#include "vollab/model.hpp"
#include "vollab/tensor.hpp"

namespace vollab {

enum class OptKind { SGD, Adam, Muon };

const char* opt_name(OptKind k);
OptKind opt_from_name(const std::string& s);

struct OptimizerConfig {
  OptKind kind = OptKind::Adam;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double momentum = 0.0;        // SGD heavy-ball coefficient
  double beta1 = 0.9;           // Adam / fallback first moment
  double beta2 = 0.999;         // Adam / fallback second moment
  double eps = 1e-8;
  double muon_momentum = 0.95;  // matrix-branch momentum
  int ns_steps = 5;             // Newton-Schulz iterations

  void validate() const;
};

// Per-parameter slots: buf1 holds SGD/matrix momentum or the Adam first
// moment, buf2 the Adam second moment. t counts completed steps.
struct OptimizerState {
  std::vector<Tensor> buf1;
  std::vector<Tensor> buf2;
  std::int64_t t = 0;

  static OptimizerState zeros_like(const Parameters& p);
};

// One in-place update of params from grads. Throws NumericError on non-finite
// gradients or if the update produces non-finite parameters.
void opt_step(const OptimizerConfig& cfg, Parameters& params,
              const Gradients& grads, OptimizerState& state);

// Runs the quintic Newton-Schulz iteration on the matrix view of M
// (rows = shape[0], cols = remaining extent). Singular values are mapped
// toward 1; the zero matrix is returned unchanged. Operates at the scale of
// M / ||M||_F; tall inputs are transposed internally and restored.
Tensor newton_schulz(const Tensor& M, int steps = 5);

// Discards optimizer memory: returns a copy of the parameters paired with
// freshly zeroed state (moments cleared, t = 0), as used by the mid-run
// optimizer-swap experiment. The parameter step counter is preserved so the
// batch stream resumes where it left off.
std::pair<Parameters, OptimizerState> hard_reset(const Parameters& source);

}  // namespace vollab
