#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jetholo/flow.hpp"
#include "jetholo/geometry.hpp"

namespace jetholo {

/// Partial connection given by one projectable lift per foliation generator, extended
/// C-infinity-linearly in the generator coefficients.
class Connection {
 public:
  /// Checks counts, variables and projectability. Whether each lift actually projects onto its
  /// generator is left to validate_right_inverse().
  Connection(Bundle bundle, Foliation foliation, std::vector<ProjField> lifts);

  /// Lifts with zero fibre components.
  static Connection trivial(Bundle bundle, Foliation foliation);

  const Bundle& bundle() const { return bundle_; }
  const Foliation& foliation() const { return foliation_; }
  const std::vector<ProjField>& lifts() const { return lifts_; }
  /// Every fibre component is affine in the fibre coordinates.
  bool affine_fibre() const { return affine_; }

 private:
  Bundle bundle_;
  Foliation foliation_;
  std::vector<ProjField> lifts_;
  bool affine_ = false;
};

/// Components (a, b) of a projectable field at a total-space point (base then fibre).
Eigen::VectorXd evaluate(const Bundle& bundle, const ProjField& X, const Eigen::VectorXd& p,
                         double t = 0.0);

/// sum_i c_i * lift_i; coefficients are Exprs over t and base coordinates.
ProjField lift_combination(const Connection& c, std::span<const Expr> coeffs);

struct RightInverseReport {
  bool passed = true;
  double worst = 0.0;
  /// Worst residual per generator.
  std::vector<double> per_generator;
  int points_checked = 0;
};

/// Max-norm residual between the base part of each lift and its generator at each sample.
RightInverseReport validate_right_inverse(const Connection& c, std::span<const Eigen::VectorXd> samples,
                                          double tol = 1e-8);

struct BracketFailure {
  int i = 0;
  int j = 0;
  /// Total-space point (base then fibre).
  Eigen::VectorXd point;
  double residual = 0.0;
};

struct BracketReport {
  bool passed = true;
  /// Largest residual over all determinate and failing samples.
  double worst = 0.0;
  int pairs_checked = 0;
  int points_checked = 0;
  /// Samples where the generator values are dependent and some admissible coefficient choice
  /// matches the lifted bracket: no verdict is possible there.
  int indeterminate = 0;
  /// Samples where the base bracket is not in the pointwise span (an involutivity failure).
  int outside_span = 0;
  std::vector<BracketFailure> failures;
  std::string caveat;
};

/// Compares [l X_i, l X_j] with sum_k lambda_k l X_k at total-space points above each base
/// sample, where lambda solves sum_k lambda_k X_k = [X_i, X_j] pointwise. Fibre points are the
/// lattice at fractions 1/4, 1/2, 3/4 of each fibre axis. When lambda is not unique the
/// residual is minimised over all solutions; a positive minimum is still a failure.
BracketReport validate_bracket_preserving(const Connection& c, std::span<const Eigen::VectorXd> samples,
                                          double tol = 1e-8);

struct GuardReport {
  /// The fibre trajectory left the box before t_max.
  bool exited = false;
  double exit_time = 0.0;
  Eigen::VectorXd exit_point;
  /// Status of the unconstrained integration to t_max.
  FlowStatus status = FlowStatus::Ok;
  double t_stop = 0.0;
  std::string message;

  bool blowup() const { return status == FlowStatus::Blowup; }
};

/// Integrates a projectable field on the total space from `start` (base then fibre) over
/// [0, t_max] and reports the first time the fibre part leaves `fibre_box` (default: the
/// bundle's fibre domain), and whether the solution blows up. A numerical completeness probe.
GuardReport flow_domain_guard(const Connection& c, const ProjField& field, const Eigen::VectorXd& start,
                              double t_max, const std::optional<Box>& fibre_box = std::nullopt,
                              const OdeOptions& opts = {});

}  // namespace jetholo
