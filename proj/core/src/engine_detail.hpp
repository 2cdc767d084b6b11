#pragma once
// Internal kernel interface between the engine dispatcher and the four
// architecture implementations. Each kernel processes one chunk of rows:
//   predict: forecasts only, no caches.
//   chunk_backward: runs a cached forward, appends each row's squared
//     residual to sq_sum in row order, and accumulates d/dtheta of
//     sum_i (pred_i - y_i)^2 into acc (unnormalized; the dispatcher divides
//     by the total row count once at the end).

#include "vollab/engine.hpp"

namespace vollab::detail {

// Rows per kernel invocation. Fixed so the floating-point reduction order --
// and therefore every artifact hash -- never depends on runtime conditions.
inline constexpr std::size_t kChunk = 64;

void mlp_predict(const Parameters& p, const double* X, std::size_t n,
                 double* out);
void mlp_chunk_backward(const Parameters& p, const double* X, const double* y,
                        std::size_t n, double& sq_sum, Gradients& acc);

void cnn_predict(const Parameters& p, const double* X, std::size_t n,
                 double* out);
void cnn_chunk_backward(const Parameters& p, const double* X, const double* y,
                        std::size_t n, double& sq_sum, Gradients& acc);

void lstm_predict(const Parameters& p, const double* X, std::size_t n,
                  double* out);
void lstm_chunk_backward(const Parameters& p, const double* X, const double* y,
                         std::size_t n, double& sq_sum, Gradients& acc);

void tf_predict(const Parameters& p, const double* X, std::size_t n,
                double* out);
void tf_chunk_backward(const Parameters& p, const double* X, const double* y,
                       std::size_t n, double& sq_sum, Gradients& acc);

// Throws NumericError naming `where` if any of the n values is non-finite.
void require_finite(const double* v, std::size_t n, const char* where);

}  // namespace vollab::detail
