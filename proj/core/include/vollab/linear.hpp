#pragma once
// Linear baselines: closed-form least squares and L1-penalized coordinate
// descent, both with an explicit intercept (never a constant column).

#include <vector>

#include "vollab/tensor.hpp"

namespace vollab {

struct LinearModel {
  enum class Kind { OLS, LASSO };
  Kind kind = Kind::OLS;
  std::vector<double> w;  // length = feature count
  double b = 0.0;
  double alpha = 0.0;     // L1 penalty (LASSO only)
  bool used_pinv = false; // rank-deficient system solved by pseudo-inverse
  double kkt_gap = 0.0;   // final KKT residual (LASSO only)

  double predict_one(const double* x) const;
  std::vector<double> predict(const double* X, std::size_t n) const;
  std::vector<double> predict(const Tensor& X) const;
};

// Minimizes ||y - Xw - b||^2 via centered normal equations (LDLT); falls back
// to an SVD pseudo-inverse on rank-deficient designs (flagged in the result).
LinearModel ols_fit(const ConstMatMap& X, const std::vector<double>& y);

// Minimizes (1/2n)||y - Xw - b||^2 + alpha*||w||_1 by cyclic coordinate
// descent on centered data. Converged when the KKT residual drops below
// kkt_tol; throws NumericError if max_sweeps is exhausted first.
LinearModel lasso_fit(const ConstMatMap& X, const std::vector<double>& y,
                      double alpha, double kkt_tol = 1e-8,
                      std::size_t max_sweeps = 100000);

inline const std::vector<double> kLassoGrid = {0.001, 0.01, 0.025,
                                               0.05,  0.1,  0.25};

// Fits each alpha on the training block, scores on validation MSE, picks the
// winner (ties in favor of the larger alpha = the sparser model), and refits
// it on train+validation combined.
LinearModel lasso_select(const ConstMatMap& X_train,
                         const std::vector<double>& y_train,
                         const ConstMatMap& X_val,
                         const std::vector<double>& y_val,
                         const std::vector<double>& alphas = kLassoGrid);

}  // namespace vollab
