#include "vollab/objective.hpp"

#include "vollab/common.hpp"

namespace vollab {

double Objective::loss(const std::vector<double>& theta) const {
  std::vector<double> g;
  return loss_grad(theta, g);
}

// ============================================================================
// QuadraticObjective
// ============================================================================

QuadraticObjective::QuadraticObjective(Eigen::MatrixXd A) : A_(std::move(A)) {
  if (A_.rows() != A_.cols())
    throw ShapeError("quadratic objective: matrix must be square");
  if (!A_.isApprox(A_.transpose(), 1e-12))
    throw ShapeError("quadratic objective: matrix must be symmetric");
}

std::size_t QuadraticObjective::dim() const {
  return static_cast<std::size_t>(A_.rows());
}

double QuadraticObjective::loss_grad(const std::vector<double>& theta,
                                     std::vector<double>& grad) const {
  if (theta.size() != dim())
    throw ShapeError("quadratic objective: dimension mismatch");
  const Eigen::Map<const Eigen::VectorXd> t(theta.data(),
                                            static_cast<Eigen::Index>(dim()));
  grad.resize(dim());
  Eigen::Map<Eigen::VectorXd> g(grad.data(), static_cast<Eigen::Index>(dim()));
  g.noalias() = A_ * t;
  return 0.5 * t.dot(g);
}

// ============================================================================
// ModelObjective
// ============================================================================

ModelObjective::ModelObjective(const WindowedDataset& ds,
                               const Parameters& shape,
                               std::vector<std::size_t> rows)
    : ds_(&ds), work_(shape), rows_(std::move(rows)) {
  if (rows_.empty()) throw ConfigError("model objective: empty row set");
  for (std::size_t r : rows_)
    if (r >= ds.y.size())
      throw ShapeError("model objective: row index out of range");
}

std::size_t ModelObjective::dim() const { return work_.n_scalars(); }

double ModelObjective::loss_grad(const std::vector<double>& theta,
                                 std::vector<double>& grad) const {
  if (theta.size() != dim())
    throw ShapeError("model objective: dimension mismatch");
  work_.unflatten(theta);
  Gradients g;
  const double loss = grad_on_rows(work_, *ds_, rows_, g);
  grad.clear();
  grad.reserve(dim());
  for (const Tensor& t : g.g) grad.insert(grad.end(), t.v.begin(), t.v.end());
  return loss;
}

}  // namespace vollab
