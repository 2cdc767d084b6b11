#pragma once
// Dense 64-bit tensor with row-major storage.
//
// This is deliberately minimal: the four model architectures need 1-D to 3-D
// arrays and matrix views, nothing more. Heavy lifting (GEMM, decompositions)
// goes through Eigen maps over the flat storage; all Eigen usage is
// single-threaded so a fixed reduction order is preserved.

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vollab/common.hpp"

namespace vollab {

using MatrixRM =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<MatrixRM>;
using ConstMatMap = Eigen::Map<const MatrixRM>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    v.assign(numel_of(shape), 0.0);
  }
  Tensor(std::vector<std::size_t> s, std::vector<double> data)
      : shape(std::move(s)), v(std::move(data)) {
    if (v.size() != numel_of(shape)) throw ShapeError("tensor data/shape mismatch");
  }

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1},
                           std::multiplies<std::size_t>());
  }

  std::size_t numel() const { return v.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  double* data() { return v.data(); }
  const double* data() const { return v.data(); }

  // 2-D element access (row-major).
  double& at(std::size_t r, std::size_t c) { return v[r * shape[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * shape[1] + c]; }

  // Matrix view of a rank-2 tensor (or a rank-3 tensor flattened over its
  // trailing dimensions, which is how conv kernels enter GEMMs).
  MatMap mat() {
    check_matrix_view();
    return MatMap(v.data(), static_cast<Eigen::Index>(shape[0]),
                  static_cast<Eigen::Index>(numel() / shape[0]));
  }
  ConstMatMap mat() const {
    check_matrix_view();
    return ConstMatMap(v.data(), static_cast<Eigen::Index>(shape[0]),
                       static_cast<Eigen::Index>(numel() / shape[0]));
  }

  VecMap vec() { return VecMap(v.data(), static_cast<Eigen::Index>(numel())); }
  ConstVecMap vec() const {
    return ConstVecMap(v.data(), static_cast<Eigen::Index>(numel()));
  }

  void fill(double x) { std::fill(v.begin(), v.end(), x); }

  bool all_finite() const {
    for (double x : v)
      if (!is_finite(x)) return false;
    return true;
  }

 private:
  void check_matrix_view() const {
    if (shape.empty() || shape[0] == 0)
      throw ShapeError("matrix view of empty tensor");
  }
};

inline std::string shape_str(const Tensor& t) {
  std::string s = "(";
  for (std::size_t i = 0; i < t.shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(t.shape[i]);
  }
  return s + ")";
}

}  // namespace vollab
