#pragma once

// Small dense linear-algebra helpers shared by the validators.

#include <Eigen/Dense>

namespace jetholo::detail {

/// Minimum-norm least-squares solution of G lambda = y.
inline Eigen::VectorXd least_squares(const Eigen::MatrixXd& G, const Eigen::VectorXd& y) {
  if (G.cols() == 0) return Eigen::VectorXd::Zero(0);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(G);
  return cod.solve(y);
}

/// |y - G lambda*| for the least-squares lambda*; |y| when G has no columns or is zero.
inline double span_residual(const Eigen::MatrixXd& G, const Eigen::VectorXd& y) {
  if (G.cols() == 0 || G.isZero(0.0)) return y.norm();
  return (y - G * least_squares(G, y)).norm();
}

/// Numerical rank with threshold rel_tol * sigma_max.
inline int numerical_rank(const Eigen::MatrixXd& A, double rel_tol) {
  if (A.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > rel_tol * s[0]) ++r;
  return r;
}

}  // namespace jetholo::detail
