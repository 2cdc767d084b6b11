#include "vollab/linear.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdio>

#include "vollab/common.hpp"

namespace vollab {

// ============================================================================
// Prediction
// ============================================================================

double LinearModel::predict_one(const double* x) const {
  double s = b;
  for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * x[j];
  return s;
}

std::vector<double> LinearModel::predict(const double* X, std::size_t n) const {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = predict_one(X + i * w.size());
  return out;
}

std::vector<double> LinearModel::predict(const Tensor& X) const {
  if (X.shape.size() != 2 || static_cast<std::size_t>(X.shape[1]) != w.size())
    throw ShapeError("linear predict: design shape mismatch");
  return predict(X.v.data(), static_cast<std::size_t>(X.shape[0]));
}

// ============================================================================
// Centering helpers
// ============================================================================

namespace {

struct Centered {
  MatrixRM Xc;
  Eigen::VectorXd yc;
  Eigen::VectorXd xbar;
  double ybar = 0.0;
};

Centered center(const ConstMatMap& X, const std::vector<double>& y) {
  const auto n = X.rows();
  if (n == 0) throw ConfigError("linear fit: empty design");
  if (static_cast<std::size_t>(n) != y.size())
    throw ShapeError("linear fit: row count of X does not match y");
  Centered c;
  c.xbar = X.colwise().mean();
  c.Xc = X.rowwise() - c.xbar.transpose();
  double s = 0.0;
  for (double v : y) s += v;
  c.ybar = s / static_cast<double>(n);
  c.yc.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) c.yc[i] = y[static_cast<std::size_t>(i)] - c.ybar;
  return c;
}

double mse(const LinearModel& m, const ConstMatMap& X,
           const std::vector<double>& y) {
  double acc = 0.0;
  const std::size_t n = static_cast<std::size_t>(X.rows());
  for (std::size_t i = 0; i < n; ++i)
    acc += sq(m.predict_one(X.data() + i * static_cast<std::size_t>(X.cols())) -
              y[i]);
  return acc / static_cast<double>(n);
}

}  // namespace

// ============================================================================
// Ordinary least squares
// ============================================================================

LinearModel ols_fit(const ConstMatMap& X, const std::vector<double>& y) {
  const Centered c = center(X, y);
  const Eigen::Index d = X.cols();

  const Eigen::MatrixXd gram = c.Xc.transpose() * c.Xc;
  const Eigen::VectorXd rhs = c.Xc.transpose() * c.yc;

  LinearModel m;
  m.kind = LinearModel::Kind::OLS;

  const auto ldlt = gram.ldlt();
  Eigen::VectorXd wv = ldlt.solve(rhs);
  // Two certificates guard the fast path. The pivot ratio catches genuinely
  // rank-deficient designs (a consistent singular system can still satisfy
  // the residual check), and the normal-equation residual catches failed or
  // ill-conditioned solves. Either failure routes to the SVD path.
  const Eigen::VectorXd piv = ldlt.vectorD().cwiseAbs();
  const bool deficient =
      d > 0 && piv.minCoeff() <= 1e-12 * std::max(piv.maxCoeff(), 1e-300);
  const double scale = 1.0 + rhs.lpNorm<Eigen::Infinity>();
  if (deficient || !wv.allFinite() ||
      (gram * wv - rhs).lpNorm<Eigen::Infinity>() > 1e-8 * scale) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        c.Xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-12);
    wv = svd.solve(c.yc);
    m.used_pinv = true;
    if (!wv.allFinite()) throw NumericError("ols_fit: singular design");
  }

  m.w.assign(wv.data(), wv.data() + d);
  m.b = c.ybar - c.xbar.dot(wv);
  return m;
}

// ============================================================================
// LASSO coordinate descent
// ============================================================================

namespace {

double soft_threshold(double z, double a) {
  if (z > a) return z - a;
  if (z < -a) return z + a;
  return 0.0;
}

// Largest violation of the stationarity conditions of
// (1/2n)||yc - Xc w||^2 + alpha*||w||_1 at the current iterate.
double kkt_residual(const MatrixRM& Xc, const Eigen::VectorXd& r,
                    const Eigen::VectorXd& w, double alpha, double inv_n) {
  double gap = 0.0;
  for (Eigen::Index j = 0; j < Xc.cols(); ++j) {
    const double g = inv_n * Xc.col(j).dot(r);  // -d(smooth)/dw_j
    double viol;
    if (w[j] > 0.0)
      viol = std::fabs(g - alpha);
    else if (w[j] < 0.0)
      viol = std::fabs(g + alpha);
    else
      viol = std::max(0.0, std::fabs(g) - alpha);
    gap = std::max(gap, viol);
  }
  return gap;
}

}  // namespace

LinearModel lasso_fit(const ConstMatMap& X, const std::vector<double>& y,
                      double alpha, double kkt_tol, std::size_t max_sweeps) {
  if (alpha < 0.0) throw ConfigError("lasso_fit: alpha must be >= 0");
  const Centered c = center(X, y);
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  Eigen::VectorXd colsq(d);
  for (Eigen::Index j = 0; j < d; ++j)
    colsq[j] = inv_n * c.Xc.col(j).squaredNorm();

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd r = c.yc;  // residual yc - Xc*w

  LinearModel m;
  m.kind = LinearModel::Kind::LASSO;
  m.alpha = alpha;

  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (colsq[j] == 0.0) continue;  // constant column: penalty keeps it at 0
      const double wj = w[j];
      const double rho = inv_n * c.Xc.col(j).dot(r) + colsq[j] * wj;
      const double wn = soft_threshold(rho, alpha) / colsq[j];
      if (wn != wj) {
        r += c.Xc.col(j) * (wj - wn);
        w[j] = wn;
      }
    }
    const double gap = kkt_residual(c.Xc, r, w, alpha, inv_n);
    if (gap < kkt_tol) {
      m.kkt_gap = gap;
      m.w.assign(w.data(), w.data() + d);
      m.b = c.ybar - c.xbar.dot(w);
      return m;
    }
  }
  throw NumericError("lasso_fit: coordinate descent failed to reach KKT tolerance");
}

LinearModel lasso_select(const ConstMatMap& X_train,
                         const std::vector<double>& y_train,
                         const ConstMatMap& X_val,
                         const std::vector<double>& y_val,
                         const std::vector<double>& alphas) {
  if (alphas.empty()) throw ConfigError("lasso_select: empty alpha grid");
  double best_loss = std::numeric_limits<double>::infinity();
  double best_alpha = alphas.front();
  for (double a : alphas) {
    const LinearModel m = lasso_fit(X_train, y_train, a);
    const double loss = mse(m, X_val, y_val);
    // <= so that equal validation losses resolve to the larger (sparser) alpha
    if (loss <= best_loss) {
      best_loss = loss;
      best_alpha = a;
    }
  }

  // Refit the winning alpha on train + validation combined.
  const std::size_t d = static_cast<std::size_t>(X_train.cols());
  const std::size_t nt = static_cast<std::size_t>(X_train.rows());
  const std::size_t nv = static_cast<std::size_t>(X_val.rows());
  std::vector<double> Xall((nt + nv) * d);
  std::copy(X_train.data(), X_train.data() + nt * d, Xall.begin());
  std::copy(X_val.data(), X_val.data() + nv * d, Xall.begin() + nt * d);
  std::vector<double> yall = y_train;
  yall.insert(yall.end(), y_val.begin(), y_val.end());
  return lasso_fit(ConstMatMap(Xall.data(), static_cast<Eigen::Index>(nt + nv),
                               static_cast<Eigen::Index>(d)),
                   yall, best_alpha);
}

}  // namespace vollab
