#pragma once
// Loss and gradient evaluation for all architectures.
//
// The engine is first-order only: each architecture has a hand-written
// backward pass producing exact reverse-mode gradients of the mean-squared
// error. Everything runs in 64-bit floats with a fixed reduction order:
// rows are processed in index order in fixed-size chunks, per-row squared
// residuals accumulate sequentially, and all matrix products go through
// single-threaded Eigen kernels. Reruns are bit-identical.

#include <cstddef>
#include <vector>

#include "vollab/ingest.hpp"
#include "vollab/model.hpp"

namespace vollab {

// Per-parameter gradient tensors, index-aligned with Parameters::items.
struct Gradients {
  std::vector<Tensor> g;

  static Gradients zeros_like(const Parameters& p);
  void zero();
  void scale(double c);
  bool all_finite() const;
  double dot(const Gradients& other) const;
  double norm() const;
};

// Mean over the batch of (prediction - target)^2.
double forward_loss(const Parameters& p, const double* X, const double* y,
                    std::size_t n);

// Reverse-mode gradients of forward_loss for every parameter; returns the
// loss. `out` is resized/zeroed internally.
double grad(const Parameters& p, const double* X, const double* y,
            std::size_t n, Gradients& out);

// Forward pass without caches; writes n forecasts.
void predict(const Parameters& p, const double* X, std::size_t n, double* out);

std::vector<double> predict(const Parameters& p, const Tensor& X);

// ---- dataset-row helpers ---------------------------------------------------

// Gathers dataset rows into contiguous batch buffers.
void gather_rows(const WindowedDataset& ds, const std::vector<std::size_t>& rows,
                 std::vector<double>& xbuf, std::vector<double>& ybuf);

double loss_on_rows(const Parameters& p, const WindowedDataset& ds,
                    const std::vector<std::size_t>& rows);
double grad_on_rows(const Parameters& p, const WindowedDataset& ds,
                    const std::vector<std::size_t>& rows, Gradients& out);
std::vector<double> predict_rows(const Parameters& p, const WindowedDataset& ds,
                                 const std::vector<std::size_t>& rows);

}  // namespace vollab
