#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jetholo/geometry.hpp"

namespace jetholo {

enum class FlowStatus { Ok, DomainExit, Blowup, MaxSteps, EvalFailure };

std::string to_string(FlowStatus s);

struct OdeOptions {
  double rtol = 1e-9;
  double atol = 1e-9;
  int max_steps = 200000;
  /// State max-norm beyond which the solution is declared to blow up.
  double blowup_norm = 1e12;
  /// Upper bound on |h|; 0 means the full interval.
  double max_step = 0.0;
};

struct FlowDiagnostics {
  FlowStatus status = FlowStatus::Ok;
  int accepted = 0;
  int rejected = 0;
  /// Largest scaled local error estimate among accepted steps (<= 1 by construction).
  double max_error = 0.0;
  /// Time reached (exit/blowup time when status != Ok).
  double t_stop = 0.0;
  std::string message;
};

using OdeRhs = std::function<void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dydt)>;

/// Solution of an initial value problem with cubic Hermite dense output.
///
/// Times are monotone from t0 towards t1 (decreasing for backward integration).
class FlowResult {
 public:
  FlowResult() = default;

  double t0() const { return times_.front(); }
  double t_end() const { return times_.back(); }
  const Eigen::VectorXd& endpoint() const { return states_.back(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<Eigen::VectorXd>& states() const { return states_; }
  const std::vector<Eigen::VectorXd>& derivatives() const { return derivs_; }
  const FlowDiagnostics& diagnostics() const { return diag_; }
  bool ok() const { return diag_.status == FlowStatus::Ok; }

  /// Dense output on [min(t0,t_end), max(t0,t_end)].
  Eigen::VectorXd at(double t) const;

  /// The same trajectory traversed backwards: s = t_total - t, derivatives negated.
  FlowResult reversed(double t_total) const;

  static FlowResult constant(const Eigen::VectorXd& y, double t0, double t1);

 private:
  friend FlowResult integrate_ode(const OdeRhs&, const Eigen::VectorXd&, double, double,
                                  const OdeOptions&, const Box*);
  std::vector<double> times_;
  std::vector<Eigen::VectorXd> states_;
  std::vector<Eigen::VectorXd> derivs_;
  FlowDiagnostics diag_;
};

class FlowError : public std::runtime_error {
 public:
  FlowError(FlowStatus status, double t, Eigen::VectorXd state, const std::string& what)
      : std::runtime_error(what), status_(status), t_(t), state_(std::move(state)) {}

  FlowStatus status() const { return status_; }
  double time() const { return t_; }
  const Eigen::VectorXd& state() const { return state_; }

 private:
  FlowStatus status_;
  double t_;
  Eigen::VectorXd state_;
};

/// Adaptive Dormand-Prince 5(4) integration from t0 to t1 (either direction). Never throws for
/// integration failures: the returned diagnostics carry the status and the trajectory stops
/// there. With a domain box, the first exit is located on the dense output by bisection.
/// An EvalError raised by the right-hand side rejects the step.
FlowResult integrate_ode(const OdeRhs& rhs, const Eigen::VectorXd& y0, double t0, double t1,
                         const OdeOptions& opts = {}, const Box* domain = nullptr);

/// Flow of a (possibly time-dependent) vector field given by Expr components over `coords`
/// (plus t). Throws FlowError unless the integration reaches t1.
FlowResult integrate(std::span<const Expr> field, std::span<const std::string> coords,
                     const Eigen::VectorXd& x0, double t0, double t1, const OdeOptions& opts = {},
                     const Box* domain = nullptr);

/// Cutoff window w(t) = bump(t; eps/2, eps) * (1 - bump(t; d-eps, d-eps/2)); identically zero on
/// (-inf, eps/2] and [d - eps/2, inf).
Expr window(double duration, double margin);

/// Closed form of the window integral over [0, d]: d - 1.5 eps.
double window_integral(double duration, double margin);

/// One smooth piece of a leafwise path, in local time t in [0, duration].
struct PathSegment {
  Eigen::VectorXd start;
  double duration = 0.0;
  double margin = 0.0;
  /// Generator coefficients, already multiplied by the window; Exprs over t and base coordinates.
  std::vector<Expr> coeffs;
  FlowResult trajectory;
};

/// A leafwise path: a finite sequence of windowed segments (run in order) over one foliation.
class LeafwisePath {
 public:
  const Foliation& foliation() const { return foliation_; }
  const std::vector<PathSegment>& segments() const { return segments_; }
  const Eigen::VectorXd& start() const { return start_; }
  const Eigen::VectorXd& end() const;
  double duration() const;

  /// Base field X(t) = sum_i c_i(t, x) X_i(x) of one segment, in local time.
  BaseField field(std::size_t segment) const;
  /// Base point at global time t in [0, duration()].
  Eigen::VectorXd at(double t) const;
  /// Windowed coefficient of generator i over global time (time-shifted sum over segments).
  Expr combined_coefficient(int generator) const;
  /// True iff every coefficient of every segment depends on t only.
  bool time_only_coefficients() const;

 private:
  friend LeafwisePath make_path(const Foliation&, const Eigen::VectorXd&, double, double,
                                std::vector<Expr>, const OdeOptions&);
  friend LeafwisePath constant_path(const Foliation&, const Eigen::VectorXd&, double);
  friend LeafwisePath concatenate(const LeafwisePath&, const LeafwisePath&, double);
  friend LeafwisePath invert(const LeafwisePath&);

  LeafwisePath(Foliation f, Eigen::VectorXd start) : foliation_(std::move(f)), start_(std::move(start)) {}

  Foliation foliation_;
  Eigen::VectorXd start_;
  std::vector<PathSegment> segments_;
};

/// Path of duration d with sitting margin eps in (0, d/4) (eps <= 0 selects d/10). Raw
/// coefficients c_i(t, x) are multiplied by the window; the trajectory is integrated at once.
/// Throws FlowError if the trajectory leaves the chart box or blows up.
LeafwisePath make_path(const Foliation& F, const Eigen::VectorXd& x0, double duration,
                       double margin, std::vector<Expr> coeffs, const OdeOptions& opts = {});

/// Identity morphism at x0 (all coefficients zero).
LeafwisePath constant_path(const Foliation& F, const Eigen::VectorXd& x0, double duration = 1.0);

/// p1 o p2: runs p2 first, then p1. Requires end(p2) = start(p1) within `junction_tol`.
LeafwisePath concatenate(const LeafwisePath& p1, const LeafwisePath& p2, double junction_tol = 1e-7);

/// gamma^{-1}(t) = gamma(d - t) with coefficients c^inv(t, x) = -c(d - t, x).
LeafwisePath invert(const LeafwisePath& p);

/// Integral over [0, d] of the windowed coefficient of a segment; the coefficient must depend on
/// t only.
double exposure(const PathSegment& segment, int generator);

/// Whether two foliations are the same context (same chart names, generator names and fields).
bool same_foliation(const Foliation& a, const Foliation& b);

}  // namespace jetholo
