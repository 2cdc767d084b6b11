// Stacked LSTM over the lag sequence (one scalar feature per step). Gates
// are packed [input | forget | cell | output] along the 4H axis with a single
// bias vector per layer:
//   z_t = x_t Wx + h_{t-1} Wh + b
//   i,f,o = sigmoid, g = tanh; c_t = f.c_{t-1} + i.g; h_t = o.tanh(c_t)
// The readout is the final step's top-layer hidden state into a linear head.
// Backward is plain BPTT over cached gate activations and cell states.

#include "engine_detail.hpp"

namespace vollab::detail {

namespace {

struct LstmIdx {
  std::vector<std::size_t> wx, wh, b;
  std::size_t out_w, out_b;
};

LstmIdx lstm_indices(const Parameters& p) {
  LstmIdx ix;
  for (std::size_t l = 0; l < p.cfg.lstm.layers; ++l) {
    const std::string stem = "lstm" + std::to_string(l);
    ix.wx.push_back(p.index_of(stem + ".wx"));
    ix.wh.push_back(p.index_of(stem + ".wh"));
    ix.b.push_back(p.index_of(stem + ".b"));
  }
  ix.out_w = p.index_of("out.w");
  ix.out_b = p.index_of("out.b");
  return ix;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct LstmCache {
  // [layer][t]: activated gates (n, 4H), cell state (n, H), hidden (n, H).
  std::vector<std::vector<MatrixRM>> gates, c, h;
};

void lstm_forward(const Parameters& p, const LstmIdx& ix, const double* X,
                  std::size_t n, LstmCache* cache, double* pred) {
  const std::size_t L = p.cfg.L;
  const std::size_t H = p.cfg.lstm.hidden;
  const std::size_t nl = p.cfg.lstm.layers;
  const Eigen::Index Hn = static_cast<Eigen::Index>(H);

  if (cache) {
    cache->gates.assign(nl, {});
    cache->c.assign(nl, {});
    cache->h.assign(nl, {});
  }

  // Layer inputs for the current layer at every step; starts as the scalar
  // series, becomes the previous layer's hidden sequence.
  std::vector<MatrixRM> inputs(L);
  for (std::size_t t = 0; t < L; ++t) {
    inputs[t].resize(n, 1);
    for (std::size_t s = 0; s < n; ++s) inputs[t](s, 0) = X[s * L + t];
  }

  MatrixRM h_last;  // final-step hidden of the top layer
  for (std::size_t l = 0; l < nl; ++l) {
    const auto Wx = p.items[ix.wx[l]].t.mat();
    const auto Wh = p.items[ix.wh[l]].t.mat();
    const auto bias = p.items[ix.b[l]].t.vec();
    MatrixRM h = MatrixRM::Zero(n, Hn);
    MatrixRM c = MatrixRM::Zero(n, Hn);
    for (std::size_t t = 0; t < L; ++t) {
      MatrixRM z = inputs[t] * Wx;
      z.noalias() += h * Wh;
      z.rowwise() += bias.transpose();
      // In-place gate activation: [i | f | g | o].
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        double* zp = z.data() + r * z.cols();
        for (Eigen::Index j = 0; j < Hn; ++j) zp[j] = sigmoid(zp[j]);
        for (Eigen::Index j = Hn; j < 2 * Hn; ++j) zp[j] = sigmoid(zp[j]);
        for (Eigen::Index j = 2 * Hn; j < 3 * Hn; ++j) zp[j] = std::tanh(zp[j]);
        for (Eigen::Index j = 3 * Hn; j < 4 * Hn; ++j) zp[j] = sigmoid(zp[j]);
      }
      c = z.middleCols(Hn, Hn).cwiseProduct(c) +
          z.middleCols(0, Hn).cwiseProduct(z.middleCols(2 * Hn, Hn));
      h = z.middleCols(3 * Hn, Hn).cwiseProduct(c.array().tanh().matrix());
      if (cache) {
        cache->gates[l].push_back(z);
        cache->c[l].push_back(c);
        cache->h[l].push_back(h);
      }
      inputs[t] = h;  // feeds the next layer
    }
    require_finite(h.data(), static_cast<std::size_t>(h.size()),
                   ("lstm layer " + std::to_string(l)).c_str());
    h_last = h;
  }

  Eigen::VectorXd out = h_last * p.items[ix.out_w].t.mat();
  const double bo = p.items[ix.out_b].t.v[0];
  for (std::size_t s = 0; s < n; ++s)
    pred[s] = out[static_cast<Eigen::Index>(s)] + bo;
  require_finite(pred, n, "lstm out");
}

}  // namespace

void lstm_predict(const Parameters& p, const double* X, std::size_t n,
                  double* out) {
  const LstmIdx ix = lstm_indices(p);
  lstm_forward(p, ix, X, n, nullptr, out);
}

void lstm_chunk_backward(const Parameters& p, const double* X, const double* y,
                         std::size_t n, double& sq_sum, Gradients& acc) {
  const LstmIdx ix = lstm_indices(p);
  const std::size_t L = p.cfg.L;
  const std::size_t H = p.cfg.lstm.hidden;
  const std::size_t nl = p.cfg.lstm.layers;
  const Eigen::Index Hn = static_cast<Eigen::Index>(H);

  LstmCache cache;
  std::vector<double> pred(n);
  lstm_forward(p, ix, X, n, &cache, pred.data());

  Eigen::VectorXd d(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double r = pred[s] - y[s];
    sq_sum += r * r;
    d[static_cast<Eigen::Index>(s)] = 2.0 * r;
  }

  const MatrixRM& h_top_last = cache.h[nl - 1][L - 1];
  acc.g[ix.out_w].mat().noalias() += h_top_last.transpose() * d;
  acc.g[ix.out_b].v[0] += d.sum();

  // dh arriving at each step of the layer being processed, from the layer
  // above (or from the head for the top layer, which only touches t = L-1).
  std::vector<MatrixRM> dh_from_above(
      L, MatrixRM::Zero(n, static_cast<Eigen::Index>(H)));
  dh_from_above[L - 1] = d * p.items[ix.out_w].t.mat().transpose();

  for (std::size_t l = nl; l-- > 0;) {
    const auto Wx = p.items[ix.wx[l]].t.mat();
    const auto Wh = p.items[ix.wh[l]].t.mat();
    const std::size_t in_dim = static_cast<std::size_t>(Wx.rows());

    std::vector<MatrixRM> dx(L);  // gradient at this layer's inputs
    MatrixRM dh_rec = MatrixRM::Zero(n, Hn);  // recurrent dh into step t
    MatrixRM dc = MatrixRM::Zero(n, Hn);
    for (std::size_t t = L; t-- > 0;) {
      const MatrixRM& z = cache.gates[l][t];
      const MatrixRM& c_t = cache.c[l][t];
      const auto i_g = z.middleCols(0, Hn);
      const auto f_g = z.middleCols(Hn, Hn);
      const auto g_g = z.middleCols(2 * Hn, Hn);
      const auto o_g = z.middleCols(3 * Hn, Hn);

      MatrixRM dh = dh_rec + dh_from_above[t];
      MatrixRM tanh_c = c_t.array().tanh().matrix();
      MatrixRM do_ = dh.cwiseProduct(tanh_c);
      dc.noalias() += (dh.cwiseProduct(o_g).array() *
                       (1.0 - tanh_c.array().square()))
                          .matrix();

      MatrixRM dz(n, 4 * Hn);
      dz.middleCols(0, Hn) = dc.cwiseProduct(g_g).cwiseProduct(i_g).cwiseProduct(
          (MatrixRM::Ones(n, Hn) - i_g));
      dz.middleCols(Hn, Hn) =
          (t > 0 ? MatrixRM(dc.cwiseProduct(cache.c[l][t - 1]))
                 : MatrixRM(MatrixRM::Zero(n, Hn)))
              .cwiseProduct(f_g)
              .cwiseProduct(MatrixRM::Ones(n, Hn) - f_g);
      dz.middleCols(2 * Hn, Hn) =
          dc.cwiseProduct(i_g).cwiseProduct(MatrixRM::Ones(n, Hn) -
                                            g_g.cwiseProduct(g_g));
      dz.middleCols(3 * Hn, Hn) =
          do_.cwiseProduct(o_g).cwiseProduct(MatrixRM::Ones(n, Hn) - o_g);

      // Inputs to this step (layer below's hidden, or the raw series).
      MatrixRM x_t;
      if (l == 0) {
        x_t.resize(n, 1);
        for (std::size_t s = 0; s < n; ++s) x_t(s, 0) = X[s * L + t];
      } else {
        x_t = cache.h[l - 1][t];
      }
      acc.g[ix.wx[l]].mat().noalias() += x_t.transpose() * dz;
      if (t > 0)
        acc.g[ix.wh[l]].mat().noalias() += cache.h[l][t - 1].transpose() * dz;
      acc.g[ix.b[l]].vec().noalias() += dz.colwise().sum().transpose();

      if (l > 0) dx[t] = dz * Wx.transpose();
      dh_rec.noalias() = dz * Wh.transpose();
      dc = dc.cwiseProduct(f_g);
      (void)in_dim;
    }
    if (l > 0) dh_from_above = std::move(dx);
  }
}

}  // namespace vollab::detail
