#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jetholo/symexpr.hpp"

namespace jetholo {

/// Name of the time variable that time-dependent fields and path coefficients may reference.
inline constexpr const char* kTimeVar = "t";

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double v, double slack = 0.0) const { return v >= lo - slack && v <= hi + slack; }
};

/// Axis-aligned box with nonempty interior.
class Box {
 public:
  Box() = default;
  explicit Box(std::vector<Interval> axes);

  int dim() const { return static_cast<int>(axes_.size()); }
  const Interval& operator[](int i) const { return axes_[i]; }
  const std::vector<Interval>& axes() const { return axes_; }
  bool contains(const Eigen::Ref<const Eigen::VectorXd>& p, double slack = 0.0) const;
  Eigen::VectorXd center() const;

 private:
  std::vector<Interval> axes_;
};

/// Local coordinate chart on the base: coordinate names and a domain box.
class Chart {
 public:
  Chart(std::vector<std::string> names, Box domain);

  int dim() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  const Box& domain() const { return domain_; }

 private:
  std::vector<std::string> names_;
  Box domain_;
};

/// Trivial bundle chart x fibre box.
class Bundle {
 public:
  Bundle(Chart base, std::vector<std::string> fibre_names, Box fibre_domain);

  const Chart& base() const { return base_; }
  int n_base() const { return base_.dim(); }
  int n_fibre() const { return static_cast<int>(fibre_names_.size()); }
  const std::vector<std::string>& fibre_names() const { return fibre_names_; }
  const Box& fibre_domain() const { return fibre_domain_; }
  /// Base names then fibre names.
  std::vector<std::string> total_names() const;
  /// Domain box of the total space.
  Box total_domain() const;

 private:
  Chart base_;
  std::vector<std::string> fibre_names_;
  Box fibre_domain_;
};

/// Vector field on the base, components a^i over base coordinates (and optionally t).
struct BaseField {
  std::vector<Expr> a;

  static BaseField zero(int n);
  int dim() const { return static_cast<int>(a.size()); }
};

/// Projectable field a^i d/dx^i + b^alpha d/df^alpha on a bundle.
struct ProjField {
  std::vector<Expr> a;
  std::vector<Expr> b;

  static ProjField zero(int n_base, int n_fibre);
};

struct Foliation {
  Chart chart;
  std::vector<std::string> generator_names;
  std::vector<BaseField> generators;

  Foliation(Chart chart, std::vector<std::string> names, std::vector<BaseField> generators);
  int size() const { return static_cast<int>(generators.size()); }
  /// Index of a generator by name, -1 if absent.
  int find(std::string_view name) const;
};

/// Throws InvalidArgument when a component references a name outside `allowed` (plus t).
void check_field_variables(std::span<const Expr> components, std::span<const std::string> allowed,
                           std::string_view what);

/// Projectability in coordinates: base components do not mention fibre coordinates.
bool is_projectable(const Bundle& bundle, const ProjField& X);

/// (X.d)Y - (Y.d)X over the chart coordinates.
BaseField lie_bracket(const Chart& chart, const BaseField& X, const BaseField& Y);
/// Bracket of projectable fields on the total space.
ProjField lie_bracket(const Bundle& bundle, const ProjField& X, const ProjField& Y);

/// The base part of a projectable field; throws InvalidArgument if X is not projectable.
BaseField pushforward(const Bundle& bundle, const ProjField& X);

/// Vector of expressions compiled over a fixed slot layout.
class CompiledField {
 public:
  CompiledField() = default;
  CompiledField(std::span<const Expr> components, std::span<const std::string> slots);

  int size() const { return static_cast<int>(exprs_.size()); }
  void operator()(std::span<const double> slots, Eigen::Ref<Eigen::VectorXd> out) const;
  Eigen::VectorXd operator()(std::span<const double> slots) const;

 private:
  std::vector<CompiledExpr> exprs_;
};

/// Evaluates base field components at a point (t = 0 unless given).
Eigen::VectorXd evaluate(const Chart& chart, const BaseField& X, const Eigen::VectorXd& x,
                         double t = 0.0);

/// 5^n lattice over the chart box plus `n_random` uniform points from a fixed-seed generator.
std::vector<Eigen::VectorXd> sample_points(const Chart& chart, std::uint64_t seed = 0,
                                           int lattice = 5, int n_random = 32);

/// Portable uniform doubles in [0,1) from a seeded 64-bit Mersenne twister.
class UniformSource {
 public:
  explicit UniformSource(std::uint64_t seed);
  double next();
  double uniform(double lo, double hi) { return lo + (hi - lo) * next(); }

 private:
  std::mt19937_64 engine_;
};

struct MembershipReport {
  std::vector<bool> in_span;
  std::vector<double> residuals;
  double worst = 0.0;
  bool all_in_span() const;
};

/// Pointwise least-squares residual of Y(x) against span{X_i(x)}; in span iff the residual is
/// at most tol * (1 + |Y(x)|).
MembershipReport membership_test(const BaseField& Y, const Foliation& F,
                                 std::span<const Eigen::VectorXd> samples, double tol = 1e-8);

struct InvolutivityFailure {
  int i = 0;
  int j = 0;
  Eigen::VectorXd point;
  double residual = 0.0;
};

struct InvolutivityReport {
  bool passed = true;
  double worst = 0.0;
  int pairs_checked = 0;
  int points_checked = 0;
  std::vector<InvolutivityFailure> failures;
  /// The check is pointwise: passing is necessary, not sufficient, for bracket closure.
  std::string caveat;
};

InvolutivityReport involutivity_check(const Foliation& F, std::span<const Eigen::VectorXd> samples,
                                      double tol = 1e-8);

}  // namespace jetholo
