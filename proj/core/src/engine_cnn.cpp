// 1-D convolution stack over the lag axis. The scalar input series enters as
// one channel; each block is conv(kernel, padding, stride 1) + ReLU; the
// trunk is adaptively average-pooled to a fixed length, flattened
// channel-major, and finished by a fully connected head.
//
// Activations are (time, channel) matrices per sample. A conv block runs as
// im2col + GEMM: cols(t, c*k + j) = padded(t + j, c), out = cols * W^T with
// the kernel tensor (out_ch, in_ch, k) viewed as (out_ch, in_ch*k).

#include "engine_detail.hpp"

namespace vollab::detail {

namespace {

struct CnnIdx {
  std::vector<std::size_t> conv_w, conv_b;
  std::vector<std::size_t> head_w, head_b;
  std::size_t out_w, out_b;
};

CnnIdx cnn_indices(const Parameters& p) {
  CnnIdx ix;
  for (std::size_t i = 0; i < p.cfg.cnn.channels.size(); ++i) {
    ix.conv_w.push_back(p.index_of("conv" + std::to_string(i) + ".w"));
    ix.conv_b.push_back(p.index_of("conv" + std::to_string(i) + ".b"));
  }
  for (std::size_t i = 0; i < p.cfg.cnn.head.size(); ++i) {
    ix.head_w.push_back(p.index_of("head" + std::to_string(i) + ".w"));
    ix.head_b.push_back(p.index_of("head" + std::to_string(i) + ".b"));
  }
  ix.out_w = p.index_of("out.w");
  ix.out_b = p.index_of("out.b");
  return ix;
}

// Pool bin b covers rows [floor(b*T/P), floor((b+1)*T/P)): disjoint
// contiguous bins whose sizes differ by at most one.
inline std::size_t bin_lo(std::size_t b, std::size_t T, std::size_t P) {
  return b * T / P;
}

// Zero-padded copy of (T, C) with `pad` zero rows on both ends.
MatrixRM pad_rows(const MatrixRM& x, std::size_t pad) {
  MatrixRM out = MatrixRM::Zero(x.rows() + 2 * static_cast<Eigen::Index>(pad),
                                x.cols());
  out.middleRows(static_cast<Eigen::Index>(pad), x.rows()) = x;
  return out;
}

MatrixRM im2col(const MatrixRM& padded, std::size_t t_out, std::size_t k) {
  const std::size_t C = static_cast<std::size_t>(padded.cols());
  MatrixRM cols(t_out, C * k);
  for (std::size_t t = 0; t < t_out; ++t)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t j = 0; j < k; ++j)
        cols(t, c * k + j) = padded(t + j, c);
  return cols;
}

struct CnnCache {
  // Per sample, per block: padded block input and the pre-ReLU conv output.
  std::vector<std::vector<MatrixRM>> padded, pre;
  // Per sample: trunk output after ReLU (input to pooling).
  std::vector<MatrixRM> trunk;
  // Head caches, batch-level.
  MatrixRM flat;                 // (n, C*pool)
  std::vector<MatrixRM> hpre, hpost;
};

// Forward one chunk; when cache != nullptr the backward-needed tensors are
// retained. Produces the flattened pooled features and head predictions.
void cnn_forward(const Parameters& p, const CnnIdx& ix, const double* X,
                 std::size_t n, CnnCache* cache, double* pred) {
  const auto& cc = p.cfg.cnn;
  const std::size_t L = p.cfg.L;
  const std::size_t nb = cc.channels.size();
  const std::size_t t_final = p.cfg.cnn_trunk_len();
  const std::size_t c_final = cc.channels.back();

  MatrixRM flat(n, c_final * cc.pool);
  if (cache) {
    cache->padded.resize(n);
    cache->pre.resize(n);
    cache->trunk.resize(n);
  }

  for (std::size_t s = 0; s < n; ++s) {
    // (T, C) activation, starting from the scalar series as one channel.
    MatrixRM act = ConstMatMap(X + s * L, L, 1);
    for (std::size_t blk = 0; blk < nb; ++blk) {
      const Tensor& W = p.items[ix.conv_w[blk]].t;  // (out_ch, in_ch, k)
      const Tensor& bias = p.items[ix.conv_b[blk]].t;
      const std::size_t t_out =
          static_cast<std::size_t>(act.rows()) + 2 * cc.padding - cc.kernel + 1;
      MatrixRM padded = pad_rows(act, cc.padding);
      MatrixRM cols = im2col(padded, t_out, cc.kernel);
      MatrixRM z = cols * W.mat().transpose();  // (t_out, out_ch)
      z.rowwise() += bias.vec().transpose();
      if (cache) {
        cache->padded[s].push_back(std::move(padded));
        cache->pre[s].push_back(z);
      }
      act = z.cwiseMax(0.0);
    }
    require_finite(act.data(), static_cast<std::size_t>(act.size()),
                   "cnn trunk");
    if (cache) cache->trunk[s] = act;

    // Adaptive average pooling, flattened channel-major: flat[c*P + b].
    for (std::size_t c = 0; c < c_final; ++c) {
      for (std::size_t b = 0; b < cc.pool; ++b) {
        const std::size_t lo = bin_lo(b, t_final, cc.pool);
        const std::size_t hi = bin_lo(b + 1, t_final, cc.pool);
        double sum = 0.0;
        for (std::size_t t = lo; t < hi; ++t) sum += act(t, c);
        flat(s, c * cc.pool + b) = sum / static_cast<double>(hi - lo);
      }
    }
  }

  // Fully connected head over the batch.
  MatrixRM cur = flat;
  if (cache) cache->flat = flat;
  for (std::size_t i = 0; i < cc.head.size(); ++i) {
    MatrixRM z = cur * p.items[ix.head_w[i]].t.mat();
    z.rowwise() += p.items[ix.head_b[i]].t.vec().transpose();
    require_finite(z.data(), static_cast<std::size_t>(z.size()),
                   ("cnn head" + std::to_string(i)).c_str());
    if (cache) cache->hpre.push_back(z);
    cur = z.cwiseMax(0.0);
    if (cache) cache->hpost.push_back(cur);
  }
  Eigen::VectorXd out = cur * p.items[ix.out_w].t.mat();
  const double bo = p.items[ix.out_b].t.v[0];
  for (std::size_t i = 0; i < n; ++i)
    pred[i] = out[static_cast<Eigen::Index>(i)] + bo;
  require_finite(pred, n, "cnn out");
}

}  // namespace

void cnn_predict(const Parameters& p, const double* X, std::size_t n,
                 double* out) {
  const CnnIdx ix = cnn_indices(p);
  cnn_forward(p, ix, X, n, nullptr, out);
}

void cnn_chunk_backward(const Parameters& p, const double* X, const double* y,
                        std::size_t n, double& sq_sum, Gradients& acc) {
  const CnnIdx ix = cnn_indices(p);
  const auto& cc = p.cfg.cnn;
  const std::size_t nb = cc.channels.size();
  const std::size_t nh = cc.head.size();
  const std::size_t t_final = p.cfg.cnn_trunk_len();
  const std::size_t c_final = cc.channels.back();

  CnnCache cache;
  std::vector<double> pred(n);
  cnn_forward(p, ix, X, n, &cache, pred.data());

  Eigen::VectorXd d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = pred[i] - y[i];
    sq_sum += r * r;
    d[static_cast<Eigen::Index>(i)] = 2.0 * r;
  }

  // Head backward (batch-level), mirroring the MLP.
  const MatrixRM& last = nh ? cache.hpost.back() : cache.flat;
  acc.g[ix.out_w].mat().noalias() += last.transpose() * d;
  acc.g[ix.out_b].v[0] += d.sum();
  MatrixRM g = d * p.items[ix.out_w].t.mat().transpose();
  for (std::size_t i = nh; i-- > 0;) {
    g.array() *= (cache.hpre[i].array() > 0.0).cast<double>();
    const MatrixRM& input = i == 0 ? cache.flat : cache.hpost[i - 1];
    acc.g[ix.head_w[i]].mat().noalias() += input.transpose() * g;
    acc.g[ix.head_b[i]].vec().noalias() += g.colwise().sum().transpose();
    g = g * p.items[ix.head_w[i]].t.mat().transpose();
  }
  // g is now (n, c_final * pool): gradient at the flattened pooled features.

  for (std::size_t s = 0; s < n; ++s) {
    // Un-pool into the trunk, then mask by the last ReLU.
    MatrixRM dact = MatrixRM::Zero(t_final, c_final);
    for (std::size_t c = 0; c < c_final; ++c) {
      for (std::size_t b = 0; b < cc.pool; ++b) {
        const std::size_t lo = bin_lo(b, t_final, cc.pool);
        const std::size_t hi = bin_lo(b + 1, t_final, cc.pool);
        const double share =
            g(s, c * cc.pool + b) / static_cast<double>(hi - lo);
        for (std::size_t t = lo; t < hi; ++t) dact(t, c) += share;
      }
    }

    for (std::size_t blk = nb; blk-- > 0;) {
      const Tensor& W = p.items[ix.conv_w[blk]].t;
      const MatrixRM& padded = cache.padded[s][blk];
      const MatrixRM& pre = cache.pre[s][blk];
      const std::size_t t_out = static_cast<std::size_t>(pre.rows());

      dact.array() *= (pre.array() > 0.0).cast<double>();
      MatrixRM cols = im2col(padded, t_out, cc.kernel);
      acc.g[ix.conv_w[blk]].mat().noalias() += dact.transpose() * cols;
      acc.g[ix.conv_b[blk]].vec().noalias() +=
          dact.colwise().sum().transpose();

      if (blk == 0) break;  // input gradients are not needed
      MatrixRM dcols = dact * W.mat();  // (t_out, in_ch*k)
      MatrixRM dpadded = MatrixRM::Zero(padded.rows(), padded.cols());
      const std::size_t C = static_cast<std::size_t>(padded.cols());
      for (std::size_t t = 0; t < t_out; ++t)
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t j = 0; j < cc.kernel; ++j)
            dpadded(t + j, c) += dcols(t, c * cc.kernel + j);
      dact = dpadded.middleRows(static_cast<Eigen::Index>(cc.padding),
                                dpadded.rows() -
                                    2 * static_cast<Eigen::Index>(cc.padding));
    }
  }
}

}  // namespace vollab::detail
