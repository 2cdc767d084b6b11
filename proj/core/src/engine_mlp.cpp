// Fully connected stack: L -> hidden[0] -> ... -> hidden[k-1] -> 1 with ReLU
// between layers. Weight tensors are (in, out); activations flow as
// (rows, features) matrices so every layer is one GEMM.

#include "engine_detail.hpp"

namespace vollab::detail {

namespace {

struct MlpIdx {
  std::vector<std::size_t> w, b;  // per hidden layer
  std::size_t out_w, out_b;
};

MlpIdx mlp_indices(const Parameters& p) {
  MlpIdx ix;
  const std::size_t nh = p.cfg.mlp.hidden.size();
  for (std::size_t i = 0; i < nh; ++i) {
    ix.w.push_back(p.index_of("fc" + std::to_string(i) + ".w"));
    ix.b.push_back(p.index_of("fc" + std::to_string(i) + ".b"));
  }
  ix.out_w = p.index_of("out.w");
  ix.out_b = p.index_of("out.b");
  return ix;
}

// Forward for one chunk; fills pred (n) and, when wanted, the pre-activation
// and post-activation caches used by the backward sweep.
void mlp_forward(const Parameters& p, const MlpIdx& ix, const MatrixRM& X0,
                 std::size_t n, std::vector<MatrixRM>* pre,
                 std::vector<MatrixRM>* post, double* pred) {
  const std::size_t nh = p.cfg.mlp.hidden.size();
  MatrixRM cur = X0;
  for (std::size_t i = 0; i < nh; ++i) {
    const Tensor& W = p.items[ix.w[i]].t;
    const Tensor& b = p.items[ix.b[i]].t;
    MatrixRM z = cur * W.mat();
    z.rowwise() += b.vec().transpose();
    require_finite(z.data(), static_cast<std::size_t>(z.size()),
                   ("mlp fc" + std::to_string(i)).c_str());
    if (pre) pre->push_back(z);
    cur = z.cwiseMax(0.0);
    if (post) post->push_back(cur);
  }
  const Tensor& Wo = p.items[ix.out_w].t;
  const double bo = p.items[ix.out_b].t.v[0];
  Eigen::VectorXd out = cur * Wo.mat();
  for (std::size_t i = 0; i < n; ++i) pred[i] = out[static_cast<Eigen::Index>(i)] + bo;
  require_finite(pred, n, "mlp out");
}

}  // namespace

void mlp_predict(const Parameters& p, const double* X, std::size_t n,
                 double* out) {
  const MlpIdx ix = mlp_indices(p);
  const MatrixRM X0 = ConstMatMap(X, n, p.cfg.L);
  mlp_forward(p, ix, X0, n, nullptr, nullptr, out);
}

void mlp_chunk_backward(const Parameters& p, const double* X, const double* y,
                        std::size_t n, double& sq_sum, Gradients& acc) {
  const MlpIdx ix = mlp_indices(p);
  const std::size_t nh = p.cfg.mlp.hidden.size();
  const MatrixRM X0 = ConstMatMap(X, n, p.cfg.L);

  std::vector<MatrixRM> pre, post;
  std::vector<double> pred(n);
  mlp_forward(p, ix, X0, n, &pre, &post, pred.data());

  // d/dpred of sum_i (pred_i - y_i)^2.
  Eigen::VectorXd d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = pred[i] - y[i];
    sq_sum += r * r;
    d[static_cast<Eigen::Index>(i)] = 2.0 * r;
  }

  const MatrixRM& last = nh ? post.back() : X0;
  acc.g[ix.out_w].mat().noalias() += last.transpose() * d;
  acc.g[ix.out_b].v[0] += d.sum();

  if (nh == 0) return;
  MatrixRM g = d * p.items[ix.out_w].t.mat().transpose();  // (n, hidden.back())
  for (std::size_t i = nh; i-- > 0;) {
    // ReLU mask from the cached pre-activations (zero subgradient at kinks).
    g.array() *= (pre[i].array() > 0.0).cast<double>();
    const MatrixRM& input = i == 0 ? X0 : post[i - 1];
    acc.g[ix.w[i]].mat().noalias() += input.transpose() * g;
    acc.g[ix.b[i]].vec().noalias() += g.colwise().sum().transpose();
    if (i > 0) g = g * p.items[ix.w[i]].t.mat().transpose();
  }
}

}  // namespace vollab::detail
