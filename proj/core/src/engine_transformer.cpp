// Encoder-only transformer over the lag sequence. Scalar lags are embedded
// per position (shared 1 -> d_model linear) plus a learned positional table;
// each pre-norm block applies multi-head self-attention and a ReLU
// feed-forward with residual connections; a final layer norm feeds a
// mean-pool over positions and a fully connected head.
//
// Token rows live in one (n*L, d) matrix; sample s occupies rows
// [s*L, (s+1)*L). Attention runs per sample and head on block views.

#include "engine_detail.hpp"

namespace vollab::detail {

namespace {

constexpr double kLnEps = 1e-5;

struct TfLayerIdx {
  std::size_t ln1_g, ln1_b, wq_w, wq_b, wk_w, wk_b, wv_w, wv_b, wo_w, wo_b;
  std::size_t ln2_g, ln2_b, ff1_w, ff1_b, ff2_w, ff2_b;
};

struct TfIdx {
  std::size_t emb_w, emb_b, pos;
  std::vector<TfLayerIdx> layer;
  std::size_t lnf_g, lnf_b;
  std::vector<std::size_t> head_w, head_b;
  std::size_t out_w, out_b;
};

TfIdx tf_indices(const Parameters& p) {
  TfIdx ix;
  ix.emb_w = p.index_of("emb.w");
  ix.emb_b = p.index_of("emb.b");
  ix.pos = p.index_of("pos");
  for (std::size_t l = 0; l < p.cfg.tf.layers; ++l) {
    const std::string s = "tf" + std::to_string(l);
    TfLayerIdx li;
    li.ln1_g = p.index_of(s + ".ln1.g");
    li.ln1_b = p.index_of(s + ".ln1.b");
    li.wq_w = p.index_of(s + ".wq.w");
    li.wq_b = p.index_of(s + ".wq.b");
    li.wk_w = p.index_of(s + ".wk.w");
    li.wk_b = p.index_of(s + ".wk.b");
    li.wv_w = p.index_of(s + ".wv.w");
    li.wv_b = p.index_of(s + ".wv.b");
    li.wo_w = p.index_of(s + ".wo.w");
    li.wo_b = p.index_of(s + ".wo.b");
    li.ln2_g = p.index_of(s + ".ln2.g");
    li.ln2_b = p.index_of(s + ".ln2.b");
    li.ff1_w = p.index_of(s + ".ff1.w");
    li.ff1_b = p.index_of(s + ".ff1.b");
    li.ff2_w = p.index_of(s + ".ff2.w");
    li.ff2_b = p.index_of(s + ".ff2.b");
    ix.layer.push_back(li);
  }
  ix.lnf_g = p.index_of("lnf.g");
  ix.lnf_b = p.index_of("lnf.b");
  for (std::size_t i = 0; i < p.cfg.tf.head.size(); ++i) {
    ix.head_w.push_back(p.index_of("head" + std::to_string(i) + ".w"));
    ix.head_b.push_back(p.index_of("head" + std::to_string(i) + ".b"));
  }
  ix.out_w = p.index_of("out.w");
  ix.out_b = p.index_of("out.b");
  return ix;
}

// Row-wise layer norm with cached normalized rows and reciprocal stddevs.
void ln_forward(const MatrixRM& in, ConstVecMap gamma, ConstVecMap beta,
                MatrixRM& out, MatrixRM& xhat, Eigen::VectorXd& rstd) {
  const Eigen::Index d = in.cols();
  out.resize(in.rows(), d);
  xhat.resize(in.rows(), d);
  rstd.resize(in.rows());
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    const double mu = in.row(r).mean();
    const double var = (in.row(r).array() - mu).square().mean();
    const double rs = 1.0 / std::sqrt(var + kLnEps);
    rstd[r] = rs;
    xhat.row(r) = (in.row(r).array() - mu) * rs;
    out.row(r) = xhat.row(r).cwiseProduct(gamma.transpose()) + beta.transpose();
  }
}

// Returns d(input); accumulates gain/shift gradients.
MatrixRM ln_backward(const MatrixRM& dy, const MatrixRM& xhat,
                     const Eigen::VectorXd& rstd, ConstVecMap gamma,
                     VecMap dgamma, VecMap dbeta) {
  MatrixRM dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    Eigen::RowVectorXd dxhat = dy.row(r).cwiseProduct(gamma.transpose());
    const double m1 = dxhat.mean();
    const double m2 = dxhat.cwiseProduct(xhat.row(r)).mean();
    dx.row(r) =
        rstd[r] * (dxhat.array() - m1 - xhat.row(r).array() * m2).matrix();
    dgamma.noalias() += dy.row(r).cwiseProduct(xhat.row(r)).transpose();
    dbeta.noalias() += dy.row(r).transpose();
  }
  return dx;
}

struct TfLayerCache {
  MatrixRM ln1_in, ln1_xhat;
  Eigen::VectorXd ln1_rstd;
  MatrixRM Q, K, V, A;                // A = LN1 output
  std::vector<MatrixRM> attn;         // per (sample * heads), each (L, L)
  MatrixRM concat;                    // pre-Wo head concat
  MatrixRM ln2_in, ln2_xhat;
  Eigen::VectorXd ln2_rstd;
  MatrixRM B;                         // LN2 output
  MatrixRM ff_pre, ff_post;
};

struct TfCache {
  MatrixRM E0;  // embedding output entering block 0
  std::vector<TfLayerCache> layer;
  MatrixRM lnf_in, lnf_xhat;
  Eigen::VectorXd lnf_rstd;
  MatrixRM pooled;
  std::vector<MatrixRM> hpre, hpost;
};

void tf_forward(const Parameters& p, const TfIdx& ix, const double* X,
                std::size_t n, TfCache* cache, double* pred) {
  const std::size_t L = p.cfg.L;
  const std::size_t d = p.cfg.tf.d_model;
  const std::size_t heads = p.cfg.tf.heads;
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Eigen::Index Ln = static_cast<Eigen::Index>(L);
  const Eigen::Index dn = static_cast<Eigen::Index>(d);
  const Eigen::Index dhn = static_cast<Eigen::Index>(dh);
  const Eigen::Index rows = static_cast<Eigen::Index>(n * L);

  const auto We = p.items[ix.emb_w].t.mat();  // (1, d)
  const auto be = p.items[ix.emb_b].t.vec();
  const auto pos = p.items[ix.pos].t.mat();  // (L, d)

  MatrixRM E(rows, dn);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t l = 0; l < L; ++l)
      E.row(static_cast<Eigen::Index>(s * L + l)) =
          X[s * L + l] * We.row(0) + be.transpose() +
          pos.row(static_cast<Eigen::Index>(l));
  if (cache) cache->E0 = E;

  if (cache) cache->layer.resize(p.cfg.tf.layers);
  for (std::size_t lyr = 0; lyr < p.cfg.tf.layers; ++lyr) {
    const TfLayerIdx& li = ix.layer[lyr];
    TfLayerCache local;
    TfLayerCache& c = cache ? cache->layer[lyr] : local;

    // --- attention sublayer (pre-norm, residual) ---
    c.ln1_in = E;
    ln_forward(E, p.items[li.ln1_g].t.vec(), p.items[li.ln1_b].t.vec(), c.A,
               c.ln1_xhat, c.ln1_rstd);
    c.Q = c.A * p.items[li.wq_w].t.mat();
    c.Q.rowwise() += p.items[li.wq_b].t.vec().transpose();
    c.K = c.A * p.items[li.wk_w].t.mat();
    c.K.rowwise() += p.items[li.wk_b].t.vec().transpose();
    c.V = c.A * p.items[li.wv_w].t.mat();
    c.V.rowwise() += p.items[li.wv_b].t.vec().transpose();

    c.concat.resize(rows, dn);
    c.attn.clear();
    c.attn.reserve(n * heads);
    for (std::size_t s = 0; s < n; ++s) {
      const Eigen::Index r0 = static_cast<Eigen::Index>(s * L);
      for (std::size_t h = 0; h < heads; ++h) {
        const Eigen::Index c0 = static_cast<Eigen::Index>(h * dh);
        const auto Qs = c.Q.block(r0, c0, Ln, dhn);
        const auto Ks = c.K.block(r0, c0, Ln, dhn);
        const auto Vs = c.V.block(r0, c0, Ln, dhn);
        MatrixRM scores = scale * (Qs * Ks.transpose());
        // Row-wise softmax with max subtraction.
        for (Eigen::Index r = 0; r < Ln; ++r) {
          const double mx = scores.row(r).maxCoeff();
          scores.row(r) = (scores.row(r).array() - mx).exp();
          scores.row(r) /= scores.row(r).sum();
        }
        c.concat.block(r0, c0, Ln, dhn).noalias() = scores * Vs;
        c.attn.push_back(std::move(scores));
      }
    }
    MatrixRM attn_out = c.concat * p.items[li.wo_w].t.mat();
    attn_out.rowwise() += p.items[li.wo_b].t.vec().transpose();
    E = c.ln1_in + attn_out;

    // --- feed-forward sublayer (pre-norm, residual) ---
    c.ln2_in = E;
    ln_forward(E, p.items[li.ln2_g].t.vec(), p.items[li.ln2_b].t.vec(), c.B,
               c.ln2_xhat, c.ln2_rstd);
    c.ff_pre = c.B * p.items[li.ff1_w].t.mat();
    c.ff_pre.rowwise() += p.items[li.ff1_b].t.vec().transpose();
    c.ff_post = c.ff_pre.cwiseMax(0.0);
    MatrixRM ff_out = c.ff_post * p.items[li.ff2_w].t.mat();
    ff_out.rowwise() += p.items[li.ff2_b].t.vec().transpose();
    E = c.ln2_in + ff_out;
    require_finite(E.data(), static_cast<std::size_t>(E.size()),
                   ("transformer block " + std::to_string(lyr)).c_str());
  }

  MatrixRM P, lnf_xhat_local;
  Eigen::VectorXd lnf_rstd_local;
  MatrixRM& lnf_xhat = cache ? cache->lnf_xhat : lnf_xhat_local;
  Eigen::VectorXd& lnf_rstd = cache ? cache->lnf_rstd : lnf_rstd_local;
  if (cache) cache->lnf_in = E;
  ln_forward(E, p.items[ix.lnf_g].t.vec(), p.items[ix.lnf_b].t.vec(), P,
             lnf_xhat, lnf_rstd);

  MatrixRM pooled(static_cast<Eigen::Index>(n), dn);
  for (std::size_t s = 0; s < n; ++s)
    pooled.row(static_cast<Eigen::Index>(s)) =
        P.middleRows(static_cast<Eigen::Index>(s * L), Ln).colwise().mean();
  if (cache) cache->pooled = pooled;

  MatrixRM cur = pooled;
  for (std::size_t i = 0; i < p.cfg.tf.head.size(); ++i) {
    MatrixRM z = cur * p.items[ix.head_w[i]].t.mat();
    z.rowwise() += p.items[ix.head_b[i]].t.vec().transpose();
    if (cache) cache->hpre.push_back(z);
    cur = z.cwiseMax(0.0);
    if (cache) cache->hpost.push_back(cur);
  }
  Eigen::VectorXd out = cur * p.items[ix.out_w].t.mat();
  const double bo = p.items[ix.out_b].t.v[0];
  for (std::size_t s = 0; s < n; ++s)
    pred[s] = out[static_cast<Eigen::Index>(s)] + bo;
  require_finite(pred, n, "transformer out");
}

}  // namespace

void tf_predict(const Parameters& p, const double* X, std::size_t n,
                double* out) {
  const TfIdx ix = tf_indices(p);
  tf_forward(p, ix, X, n, nullptr, out);
}

void tf_chunk_backward(const Parameters& p, const double* X, const double* y,
                       std::size_t n, double& sq_sum, Gradients& acc) {
  const TfIdx ix = tf_indices(p);
  const std::size_t L = p.cfg.L;
  const std::size_t d = p.cfg.tf.d_model;
  const std::size_t heads = p.cfg.tf.heads;
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t nhead = p.cfg.tf.head.size();
  const Eigen::Index Ln = static_cast<Eigen::Index>(L);
  const Eigen::Index dn = static_cast<Eigen::Index>(d);
  const Eigen::Index dhn = static_cast<Eigen::Index>(dh);
  const Eigen::Index rows = static_cast<Eigen::Index>(n * L);

  TfCache cache;
  std::vector<double> pred(n);
  tf_forward(p, ix, X, n, &cache, pred.data());

  Eigen::VectorXd dvec(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double r = pred[s] - y[s];
    sq_sum += r * r;
    dvec[static_cast<Eigen::Index>(s)] = 2.0 * r;
  }

  // Head backward.
  const MatrixRM& last = nhead ? cache.hpost.back() : cache.pooled;
  acc.g[ix.out_w].mat().noalias() += last.transpose() * dvec;
  acc.g[ix.out_b].v[0] += dvec.sum();
  MatrixRM g = dvec * p.items[ix.out_w].t.mat().transpose();
  for (std::size_t i = nhead; i-- > 0;) {
    g.array() *= (cache.hpre[i].array() > 0.0).cast<double>();
    const MatrixRM& input = i == 0 ? cache.pooled : cache.hpost[i - 1];
    acc.g[ix.head_w[i]].mat().noalias() += input.transpose() * g;
    acc.g[ix.head_b[i]].vec().noalias() += g.colwise().sum().transpose();
    g = g * p.items[ix.head_w[i]].t.mat().transpose();
  }
  // g: (n, d) gradient at pooled features.

  // Mean-pool backward, then the final layer norm.
  MatrixRM dP(rows, dn);
  const double invL = 1.0 / static_cast<double>(L);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t l = 0; l < L; ++l)
      dP.row(static_cast<Eigen::Index>(s * L + l)) =
          g.row(static_cast<Eigen::Index>(s)) * invL;
  MatrixRM dE =
      ln_backward(dP, cache.lnf_xhat, cache.lnf_rstd, p.items[ix.lnf_g].t.vec(),
                  acc.g[ix.lnf_g].vec(), acc.g[ix.lnf_b].vec());

  for (std::size_t lyr = p.cfg.tf.layers; lyr-- > 0;) {
    const TfLayerIdx& li = ix.layer[lyr];
    TfLayerCache& c = cache.layer[lyr];

    // --- feed-forward sublayer ---
    // E_out = ln2_in + FF(LN2(ln2_in)); dE currently holds dE_out.
    MatrixRM dff_out = dE;  // residual branch keeps dE as-is
    acc.g[li.ff2_w].mat().noalias() += c.ff_post.transpose() * dff_out;
    acc.g[li.ff2_b].vec().noalias() += dff_out.colwise().sum().transpose();
    MatrixRM dff_post = dff_out * p.items[li.ff2_w].t.mat().transpose();
    dff_post.array() *= (c.ff_pre.array() > 0.0).cast<double>();
    acc.g[li.ff1_w].mat().noalias() += c.B.transpose() * dff_post;
    acc.g[li.ff1_b].vec().noalias() += dff_post.colwise().sum().transpose();
    MatrixRM dB = dff_post * p.items[li.ff1_w].t.mat().transpose();
    dE += ln_backward(dB, c.ln2_xhat, c.ln2_rstd, p.items[li.ln2_g].t.vec(),
                      acc.g[li.ln2_g].vec(), acc.g[li.ln2_b].vec());

    // --- attention sublayer ---
    // E_mid = ln1_in + Wo(concat(LN1(ln1_in) heads)); dE holds dE_mid.
    MatrixRM dattn_out = dE;
    acc.g[li.wo_w].mat().noalias() += c.concat.transpose() * dattn_out;
    acc.g[li.wo_b].vec().noalias() += dattn_out.colwise().sum().transpose();
    MatrixRM dconcat = dattn_out * p.items[li.wo_w].t.mat().transpose();

    MatrixRM dQ = MatrixRM::Zero(rows, dn);
    MatrixRM dK = MatrixRM::Zero(rows, dn);
    MatrixRM dV = MatrixRM::Zero(rows, dn);
    for (std::size_t s = 0; s < n; ++s) {
      const Eigen::Index r0 = static_cast<Eigen::Index>(s * L);
      for (std::size_t h = 0; h < heads; ++h) {
        const Eigen::Index c0 = static_cast<Eigen::Index>(h * dh);
        const MatrixRM& attn = c.attn[s * heads + h];
        const auto Qs = c.Q.block(r0, c0, Ln, dhn);
        const auto Ks = c.K.block(r0, c0, Ln, dhn);
        const auto Vs = c.V.block(r0, c0, Ln, dhn);
        const auto dhd = dconcat.block(r0, c0, Ln, dhn);
        MatrixRM dattn = dhd * Vs.transpose();  // (L, L)
        dV.block(r0, c0, Ln, dhn).noalias() += attn.transpose() * dhd;
        // Softmax backward, row-wise.
        MatrixRM dscores(Ln, Ln);
        for (Eigen::Index r = 0; r < Ln; ++r) {
          const double dot = dattn.row(r).cwiseProduct(attn.row(r)).sum();
          dscores.row(r) =
              (attn.row(r).array() * (dattn.row(r).array() - dot)).matrix();
        }
        dQ.block(r0, c0, Ln, dhn).noalias() += scale * (dscores * Ks);
        dK.block(r0, c0, Ln, dhn).noalias() +=
            scale * (dscores.transpose() * Qs);
      }
    }

    acc.g[li.wq_w].mat().noalias() += c.A.transpose() * dQ;
    acc.g[li.wq_b].vec().noalias() += dQ.colwise().sum().transpose();
    acc.g[li.wk_w].mat().noalias() += c.A.transpose() * dK;
    acc.g[li.wk_b].vec().noalias() += dK.colwise().sum().transpose();
    acc.g[li.wv_w].mat().noalias() += c.A.transpose() * dV;
    acc.g[li.wv_b].vec().noalias() += dV.colwise().sum().transpose();
    MatrixRM dA = dQ * p.items[li.wq_w].t.mat().transpose();
    dA.noalias() += dK * p.items[li.wk_w].t.mat().transpose();
    dA.noalias() += dV * p.items[li.wv_w].t.mat().transpose();
    dE += ln_backward(dA, c.ln1_xhat, c.ln1_rstd, p.items[li.ln1_g].t.vec(),
                      acc.g[li.ln1_g].vec(), acc.g[li.ln1_b].vec());
  }

  // Embedding backward: dWe = sum x * dE0 rows, dpos accumulates per position.
  auto dWe = acc.g[ix.emb_w].mat();  // (1, d)
  auto dbe = acc.g[ix.emb_b].vec();
  auto dpos = acc.g[ix.pos].mat();  // (L, d)
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t l = 0; l < L; ++l) {
      const auto row = dE.row(static_cast<Eigen::Index>(s * L + l));
      dWe.row(0).noalias() += X[s * L + l] * row;
      dbe.noalias() += row.transpose();
      dpos.row(static_cast<Eigen::Index>(l)).noalias() += row;
    }
}

}  // namespace vollab::detail
