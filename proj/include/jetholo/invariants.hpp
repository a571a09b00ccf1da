#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jetholo/connection.hpp"
#include "jetholo/transport.hpp"

namespace jetholo {

/// Singular values below this fraction of the largest count as zero.
inline constexpr double kRankTol = 1e-10;

/// The invariance constraints at a point have no common solution.
class NoConservationLaws : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Affine constraints A z + offset = 0 on the jet fibre coordinates z at a base point.
///
/// One row per (generator, fibre coordinate, multi-index I with |I| <= k-1): the component
/// D_I(b - a^i f_i) of the vertical prolongation of the generator's lift.
struct InvarianceConstraints {
  JetLayout layout;
  Eigen::VectorXd x;
  Eigen::MatrixXd A;
  Eigen::VectorXd offset;
  /// "R/f_x": generator name and the jet name of the component.
  std::vector<std::string> labels;

  int order() const { return layout.order(); }
};

/// Throws InvalidArgument for connections that are not affine in the fibre (use
/// residual_check there) and for x outside the chart.
InvarianceConstraints invariance_constraints(const Connection& c, const Eigen::VectorXd& x, int k);

/// Solution set of the invariance constraints: particular + span(basis columns).
struct InvariantFibre {
  InvarianceConstraints constraints;
  int rank = 0;
  Eigen::VectorXd singular_values;
  Eigen::VectorXd particular;
  Eigen::MatrixXd basis;
  /// Layout indices of the coordinates left free; basis column j sets free[j] to 1.
  std::vector<int> free;

  const JetLayout& layout() const { return constraints.layout; }
  const Eigen::VectorXd& x() const { return constraints.x; }
  int order() const { return constraints.order(); }
  int fibre_dim() const { return layout().fibre_dim(); }
  int dimension() const { return static_cast<int>(basis.cols()); }
  /// particular + basis * coeffs as a jet point.
  JetPoint point(const Eigen::VectorXd& coeffs) const;
  /// Max |A z + offset| over the constraints.
  double residual(const Eigen::VectorXd& z) const;
};

/// Rank-revealing solve of the constraints. Bound coordinates are chosen from the highest layout
/// positions down, so lower-order coordinates stay free where possible. Throws
/// NoConservationLaws when the system is inconsistent.
InvariantFibre invariant_fibre(const Connection& c, const Eigen::VectorXd& x, int k);

/// Max over generators and components of |vp^k(l X)| at j (truncated to order k). Works for any
/// connection.
double residual_check(const Connection& c, const JetPoint& j, int k);

struct ConservationReport {
  bool enough = true;
  int order = 0;
  int fibre_dim = 0;
  /// False when the local dimensions come from a nonlinear solve.
  bool affine = true;
  std::vector<Eigen::VectorXd> points;
  /// Dimension of the invariant set per point; -1 where it is empty.
  std::vector<int> dims;
  std::vector<int> ranks;
  /// Per point; empty when nothing needs saying.
  std::vector<std::string> notes;
};

/// Nonempty invariant fibre at every sample. For non-affine connections each point gets a
/// Gauss-Newton solve from the zero jet; the dimension reported is fibre_dim minus the rank of
/// the constraint Jacobian at the solution found.
ConservationReport has_enough_conservation_laws(const Connection& c, std::span<const Eigen::VectorXd> samples,
                                                int k);

}  // namespace jetholo
