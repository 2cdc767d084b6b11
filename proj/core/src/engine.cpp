#include "vollab/engine.hpp"

#include <algorithm>
#include <cmath>

#include "engine_detail.hpp"

namespace vollab {

// ============================================================================
// Gradients
// ============================================================================

Gradients Gradients::zeros_like(const Parameters& p) {
  Gradients g;
  g.g.reserve(p.items.size());
  for (const auto& it : p.items) g.g.emplace_back(it.t.shape);
  return g;
}

void Gradients::zero() {
  for (auto& t : g) t.fill(0.0);
}

void Gradients::scale(double c) {
  for (auto& t : g)
    for (auto& x : t.v) x *= c;
}

bool Gradients::all_finite() const {
  for (const auto& t : g)
    if (!t.all_finite()) return false;
  return true;
}

double Gradients::dot(const Gradients& other) const {
  if (g.size() != other.g.size()) throw ShapeError("gradient dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g[i].v.size(); ++j)
      s += g[i].v[j] * other.g[i].v[j];
  return s;
}

double Gradients::norm() const { return std::sqrt(dot(*this)); }

// ============================================================================
// Dispatch
// ============================================================================

namespace {

using PredictFn = void (*)(const Parameters&, const double*, std::size_t,
                           double*);
using BackwardFn = void (*)(const Parameters&, const double*, const double*,
                            std::size_t, double&, Gradients&);

PredictFn predict_fn(Arch a) {
  switch (a) {
    case Arch::MLP: return detail::mlp_predict;
    case Arch::CNN: return detail::cnn_predict;
    case Arch::LSTM: return detail::lstm_predict;
    case Arch::Transformer: return detail::tf_predict;
  }
  throw ConfigError("unknown architecture tag");
}

BackwardFn backward_fn(Arch a) {
  switch (a) {
    case Arch::MLP: return detail::mlp_chunk_backward;
    case Arch::CNN: return detail::cnn_chunk_backward;
    case Arch::LSTM: return detail::lstm_chunk_backward;
    case Arch::Transformer: return detail::tf_chunk_backward;
  }
  throw ConfigError("unknown architecture tag");
}

}  // namespace

namespace detail {

void require_finite(const double* v, std::size_t n, const char* where) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(v[i]))
      throw NumericError(std::string("non-finite value in ") + where);
}

}  // namespace detail

void predict(const Parameters& p, const double* X, std::size_t n, double* out) {
  if (n == 0) throw ShapeError("predict: empty batch");
  const PredictFn fn = predict_fn(p.cfg.arch);
  const std::size_t L = p.cfg.L;
  for (std::size_t off = 0; off < n; off += detail::kChunk) {
    const std::size_t nc = std::min(detail::kChunk, n - off);
    fn(p, X + off * L, nc, out + off);
  }
}

std::vector<double> predict(const Parameters& p, const Tensor& X) {
  if (X.rank() != 2 || X.dim(1) != p.cfg.L)
    throw ShapeError("predict: inputs must be (n, L) with L = " +
                     std::to_string(p.cfg.L));
  std::vector<double> out(X.dim(0));
  predict(p, X.data(), X.dim(0), out.data());
  return out;
}

double forward_loss(const Parameters& p, const double* X, const double* y,
                    std::size_t n) {
  if (n == 0) throw ShapeError("forward_loss: empty batch");
  std::vector<double> pred(n);
  predict(p, X, n, pred.data());
  // One scalar accumulator over rows in index order: the documented
  // reduction order, shared with the gradient path.
  double sq_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sq_sum += sq(pred[i] - y[i]);
  const double loss = sq_sum / static_cast<double>(n);
  if (!is_finite(loss)) throw NumericError("non-finite loss");
  return loss;
}

double grad(const Parameters& p, const double* X, const double* y,
            std::size_t n, Gradients& out) {
  if (n == 0) throw ShapeError("grad: empty batch");
  if (out.g.empty()) out = Gradients::zeros_like(p);
  if (out.g.size() != p.items.size())
    throw ShapeError("grad: accumulator/parameter mismatch");
  out.zero();

  const BackwardFn fn = backward_fn(p.cfg.arch);
  const std::size_t L = p.cfg.L;
  double sq_sum = 0.0;
  for (std::size_t off = 0; off < n; off += detail::kChunk) {
    const std::size_t nc = std::min(detail::kChunk, n - off);
    fn(p, X + off * L, y + off, nc, sq_sum, out);
  }
  out.scale(1.0 / static_cast<double>(n));
  const double loss = sq_sum / static_cast<double>(n);
  if (!is_finite(loss)) throw NumericError("non-finite loss");
  if (!out.all_finite()) throw NumericError("non-finite gradient");
  return loss;
}

// ============================================================================
// Dataset-row helpers
// ============================================================================

void gather_rows(const WindowedDataset& ds, const std::vector<std::size_t>& rows,
                 std::vector<double>& xbuf, std::vector<double>& ybuf) {
  const std::size_t L = ds.L;
  xbuf.resize(rows.size() * L);
  ybuf.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* src = ds.X.data() + rows[i] * L;
    std::copy(src, src + L, xbuf.begin() + i * L);
    ybuf[i] = ds.y[rows[i]];
  }
}

double loss_on_rows(const Parameters& p, const WindowedDataset& ds,
                    const std::vector<std::size_t>& rows) {
  std::vector<double> xb, yb;
  gather_rows(ds, rows, xb, yb);
  return forward_loss(p, xb.data(), yb.data(), rows.size());
}

double grad_on_rows(const Parameters& p, const WindowedDataset& ds,
                    const std::vector<std::size_t>& rows, Gradients& out) {
  std::vector<double> xb, yb;
  gather_rows(ds, rows, xb, yb);
  return grad(p, xb.data(), yb.data(), rows.size(), out);
}

std::vector<double> predict_rows(const Parameters& p, const WindowedDataset& ds,
                                 const std::vector<std::size_t>& rows) {
  std::vector<double> xb, yb;
  gather_rows(ds, rows, xb, yb);
  std::vector<double> out(rows.size());
  predict(p, xb.data(), rows.size(), out.data());
  return out;
}

}  // namespace vollab
