#pragma once
// A minimal twice-differentiable objective interface used by the curvature
// probes, plus two concrete instances: an explicit quadratic form (whose
// Hessian is known exactly, for oracle checks) and a model loss over a fixed
// set of dataset rows, viewed through the flattened parameter vector.

#include <memory>
#include <vector>

#include "vollab/engine.hpp"
#include "vollab/ingest.hpp"
#include "vollab/model.hpp"
#include "vollab/tensor.hpp"

namespace vollab {

struct Objective {
  virtual ~Objective() = default;
  virtual std::size_t dim() const = 0;
  // Writes the gradient at theta into grad (resized) and returns the loss.
  virtual double loss_grad(const std::vector<double>& theta,
                           std::vector<double>& grad) const = 0;
  double loss(const std::vector<double>& theta) const;
};

// f(theta) = 1/2 theta^T A theta with A symmetric; gradient A theta and
// Hessian exactly A everywhere.
class QuadraticObjective final : public Objective {
 public:
  explicit QuadraticObjective(Eigen::MatrixXd A);
  std::size_t dim() const override;
  double loss_grad(const std::vector<double>& theta,
                   std::vector<double>& grad) const override;
  const Eigen::MatrixXd& hessian() const { return A_; }

 private:
  Eigen::MatrixXd A_;
};

// Mean-squared-error loss of a model over fixed rows of a dataset, as a
// function of the flattened parameter vector. The dataset must outlive the
// objective.
class ModelObjective final : public Objective {
 public:
  ModelObjective(const WindowedDataset& ds, const Parameters& shape,
                 std::vector<std::size_t> rows);
  std::size_t dim() const override;
  double loss_grad(const std::vector<double>& theta,
                   std::vector<double>& grad) const override;

 private:
  const WindowedDataset* ds_;
  mutable Parameters work_;  // scratch for unflattening theta
  std::vector<std::size_t> rows_;
};

}  // namespace vollab
