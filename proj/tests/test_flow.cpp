#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "jetholo/errors.hpp"
#include "jetholo/flow.hpp"

using namespace jetholo;

namespace {

const std::vector<std::string> kXY{"x", "y"};
const std::vector<std::string> kX{"x"};
constexpr double kPi = std::numbers::pi;

Expr P(const std::string& s, const std::vector<std::string>& vars) {
  std::vector<std::string> v = vars;
  v.emplace_back("t");
  return parse_expr(s, v);
}

Foliation circles() {
  return Foliation(Chart(kXY, Box({{-2, 2}, {-2, 2}})), {"R"}, {BaseField{{P("-y", kXY), P("x", kXY)}}});
}

Foliation germfol() {
  return Foliation(Chart(kX, Box({{-2, 2}})), {"G"}, {BaseField{{P("bump(x;0,1)", kX)}}});
}

// Duration whose default window integrates to `angle`: d - 1.5 d/10 = angle.
double duration_for(double angle) { return angle / 0.85; }

LeafwisePath quarter(const Foliation& F, const Eigen::VectorXd& x0) {
  return make_path(F, x0, duration_for(kPi / 2), 0.0, {Expr(1.0)});
}

}  // namespace

TEST(Integrate, SpecExamples) {
  const std::vector<Expr> dx{Expr(1.0)};
  FlowResult r = integrate(dx, kX, Eigen::VectorXd::Zero(1), 0.0, 1.0);
  EXPECT_NEAR(r.endpoint()[0], 1.0, 1e-9);

  const std::vector<Expr> rot{P("-y", kXY), P("x", kXY)};
  r = integrate(rot, kXY, Eigen::Vector2d(1, 0), 0.0, kPi / 2);
  EXPECT_NEAR(r.endpoint()[0], 0.0, 1e-7);
  EXPECT_NEAR(r.endpoint()[1], 1.0, 1e-7);

  const std::vector<Expr> sq{P("x^2", kX)};
  try {
    integrate(sq, kX, Eigen::VectorXd::Ones(1), 0.0, 1.0);
    FAIL() << "expected blowup";
  } catch (const FlowError& e) {
    EXPECT_EQ(e.status(), FlowStatus::Blowup);
    EXPECT_LT(e.time(), 1.0);
    EXPECT_GT(e.time(), 0.99);
  }
}

TEST(Integrate, DenseOutputAndTimesAreMonotone) {
  const std::vector<Expr> rot{P("-y", kXY), P("x", kXY)};
  const FlowResult r = integrate(rot, kXY, Eigen::Vector2d(1, 0), 0.0, 3.0);
  for (std::size_t i = 1; i < r.times().size(); ++i) EXPECT_GT(r.times()[i], r.times()[i - 1]);
  for (double t : {0.0, 0.37, 1.1, 2.5, 3.0}) {
    const Eigen::VectorXd p = r.at(t);
    EXPECT_NEAR(p[0], std::cos(t), 1e-6);
    EXPECT_NEAR(p[1], std::sin(t), 1e-6);
  }
  EXPECT_THROW(r.at(3.5), InvalidArgument);
  EXPECT_LE(r.diagnostics().max_error, 1.0);
  EXPECT_GT(r.diagnostics().accepted, 0);
}

TEST(Integrate, BackwardAndTimeDependent) {
  const std::vector<Expr> dx{Expr(1.0)};
  const FlowResult r = integrate(dx, kX, Eigen::VectorXd::Ones(1), 1.0, 0.0);
  EXPECT_NEAR(r.endpoint()[0], 0.0, 1e-12);
  EXPECT_NEAR(r.at(0.5)[0], 0.5, 1e-12);

  // x' = t x, x(0) = 1 => x(t) = exp(t^2/2)
  const std::vector<Expr> tx{P("t*x", kX)};
  const FlowResult s = integrate(tx, kX, Eigen::VectorXd::Ones(1), 0.0, 1.5);
  EXPECT_NEAR(s.endpoint()[0], std::exp(1.125), 1e-8 * std::exp(1.125));
}

TEST(Integrate, DomainExitIsLocated) {
  const Box box({{-1, 1}});
  const OdeRhs rhs = [](double, const Eigen::VectorXd&, Eigen::VectorXd& dy) { dy[0] = 2.0; };
  const FlowResult r = integrate_ode(rhs, Eigen::VectorXd::Zero(1), 0.0, 5.0, {}, &box);
  EXPECT_EQ(r.diagnostics().status, FlowStatus::DomainExit);
  EXPECT_NEAR(r.diagnostics().t_stop, 0.5, 1e-9);
  EXPECT_NEAR(r.endpoint()[0], 1.0, 1e-9);
}

TEST(Integrate, EvalFailureAndStepBudget) {
  const std::vector<Expr> lg{P("log(x)", kX)};
  // x' = log x from x = 1 stays at 1; from 0.5 it decreases into the singularity at x = 0.
  const OdeOptions o;
  EXPECT_NO_THROW(integrate(lg, kX, Eigen::VectorXd::Ones(1), 0.0, 1.0, o));
  try {
    integrate(lg, kX, Eigen::VectorXd::Constant(1, 0.5), 0.0, 5.0, o);
    FAIL();
  } catch (const FlowError& e) {
    EXPECT_NE(e.status(), FlowStatus::Ok);
  }
  OdeOptions tight;
  tight.max_steps = 3;
  tight.max_step = 0.01;
  const std::vector<Expr> dx{Expr(1.0)};
  try {
    integrate(dx, kX, Eigen::VectorXd::Zero(1), 0.0, 1.0, tight);
    FAIL();
  } catch (const FlowError& e) {
    EXPECT_EQ(e.status(), FlowStatus::MaxSteps);
  }
}

TEST(Window, VanishesExactlyNearTheEnds) {
  const double d = 2.0, eps = 0.2;
  const Expr w = window(d, eps);
  for (double t : {-1.0, 0.0, 0.05, 0.1}) EXPECT_EQ(eval(w, {{"t", t}}), 0.0);
  for (double t : {1.9, 1.95, 2.0, 3.0}) EXPECT_EQ(eval(w, {{"t", t}}), 0.0);
  for (double t : {0.2, 1.0, 1.8}) EXPECT_EQ(eval(w, {{"t", t}}), 1.0);
  // Derivatives of the window vanish exactly as well.
  const Expr dw = diff(diff(w, "t"), "t");
  for (double t : {0.0, 0.1, 1.9, 2.0}) EXPECT_EQ(eval(dw, {{"t", t}}), 0.0);
  // Symmetry w(d - t) = w(t).
  for (double t : {0.12, 0.15, 0.17, 0.6}) EXPECT_NEAR(eval(w, {{"t", d - t}}), eval(w, {{"t", t}}), 1e-14);
}

TEST(Path, ConstantWhenCoefficientsVanish) {
  const Foliation F = circles();
  const LeafwisePath p = make_path(F, Eigen::Vector2d(0.3, -0.4), 1.0, 0.0, {Expr(0.0)});
  EXPECT_EQ(p.end(), p.start());
  EXPECT_EQ(p.at(0.5), p.start());
  const LeafwisePath c = constant_path(F, Eigen::Vector2d(0.3, -0.4));
  EXPECT_EQ(c.end(), c.start());
}

TEST(Path, QuarterCircleViaWindowCorrectedDuration) {
  const Foliation F = circles();
  const LeafwisePath p = quarter(F, Eigen::Vector2d(1, 0));
  EXPECT_NEAR(p.end()[0], 0.0, 1e-6);
  EXPECT_NEAR(p.end()[1], 1.0, 1e-6);
  EXPECT_NEAR(exposure(p.segments()[0], 0), kPi / 2, 1e-10);
  EXPECT_TRUE(p.time_only_coefficients());
}

TEST(Path, GermFoliationStaysPutOnTheLeftHalfLine) {
  const Foliation F = germfol();
  const LeafwisePath p = make_path(F, Eigen::VectorXd::Constant(1, -1.0), 3.0, 0.0, {P("5*sin(t) + x", kX)});
  EXPECT_EQ(p.end()[0], -1.0);
  for (double t : {0.3, 1.5, 2.9}) EXPECT_EQ(p.at(t)[0], -1.0);
  EXPECT_FALSE(p.time_only_coefficients());
}

TEST(Path, SittingInstantsAreExact) {
  const Foliation F = circles();
  const LeafwisePath p = make_path(F, Eigen::Vector2d(1, 0), 2.0, 0.3, {P("1 + t*x", kXY)});
  const BaseField X = p.field(0);
  for (double t : {0.0, 0.1, 0.15, 1.85, 1.9, 2.0}) {
    for (const auto& a : X.a) {
      EXPECT_EQ(eval(a, {{"t", t}, {"x", 0.7}, {"y", -0.2}}), 0.0);
      EXPECT_EQ(eval(diff(a, "t"), {{"t", t}, {"x", 0.7}, {"y", -0.2}}), 0.0);
    }
  }
}

TEST(Path, TrajectorySolvesTheFieldEquation) {
  const Foliation F = circles();
  const LeafwisePath p = make_path(F, Eigen::Vector2d(0.5, 0.5), 1.5, 0.0, {P("2 + sin(3*t)", kXY)});
  const BaseField X = p.field(0);
  const FlowResult& traj = p.segments()[0].trajectory;
  for (std::size_t i = 0; i < traj.times().size(); ++i) {
    const Eigen::VectorXd v = evaluate(F.chart, X, traj.states()[i], traj.times()[i]);
    EXPECT_LT((traj.derivatives()[i] - v).norm(), 1e-12);
  }
  // Dense output against independent re-integration to each time.
  for (double t : {0.3, 0.7, 1.1}) {
    OdeOptions fine;
    fine.rtol = fine.atol = 1e-12;
    const FlowResult r = integrate(X.a, kXY, p.start(), 0.0, t, fine);
    EXPECT_LT((r.endpoint() - p.at(t)).norm(), 1e-6);
  }
  // Rotation preserves the radius.
  EXPECT_NEAR(p.end().norm(), std::sqrt(0.5), 1e-8);
}

TEST(Path, StartOutsideChartOrBadMarginIsRejected) {
  const Foliation F = circles();
  EXPECT_THROW(make_path(F, Eigen::Vector2d(3, 0), 1.0, 0.0, {Expr(1.0)}), InvalidArgument);
  EXPECT_THROW(make_path(F, Eigen::Vector2d(1, 0), 1.0, 0.3, {Expr(1.0)}), InvalidArgument);
  EXPECT_THROW(make_path(F, Eigen::Vector2d(1, 0), -1.0, 0.0, {Expr(1.0)}), InvalidArgument);
  EXPECT_THROW(make_path(F, Eigen::Vector2d(1, 0), 1.0, 0.0, {}), InvalidArgument);
  // Leaving the chart box is a flow error.
  const Foliation T(Chart(kX, Box({{-1, 1}})), {"X"}, {BaseField{{Expr(1.0)}}});
  EXPECT_THROW(make_path(T, Eigen::VectorXd::Zero(1), 5.0, 0.0, {Expr(1.0)}), FlowError);
}

TEST(Concatenate, QuarterTwiceIsHalfRotation) {
  const Foliation F = circles();
  const LeafwisePath q1 = quarter(F, Eigen::Vector2d(1, 0));
  const LeafwisePath q2 = quarter(F, q1.end());
  const LeafwisePath half = concatenate(q2, q1);
  EXPECT_NEAR(half.end()[0], -1.0, 1e-6);
  EXPECT_NEAR(half.end()[1], 0.0, 1e-6);
  EXPECT_DOUBLE_EQ(half.duration(), q1.duration() + q2.duration());
  EXPECT_EQ(half.end(), q2.end());
  EXPECT_EQ(half.segments().size(), 2u);

  const LeafwisePath direct = make_path(F, Eigen::Vector2d(1, 0), duration_for(kPi), 0.0, {Expr(1.0)});
  EXPECT_LT((direct.end() - half.end()).norm(), 1e-6);

  // The combined coefficient is the time-shifted splice of both windows.
  const Expr c = half.combined_coefficient(0);
  const double d1 = q1.duration();
  EXPECT_EQ(eval(c, {{"t", d1}}), 0.0);
  EXPECT_EQ(eval(c, {{"t", 0.5 * d1}}), 1.0);
  EXPECT_EQ(eval(c, {{"t", 1.5 * d1}}), 1.0);
}

TEST(Concatenate, UnitLawAndMismatch) {
  const Foliation F = circles();
  const LeafwisePath p = quarter(F, Eigen::Vector2d(1, 0));
  const LeafwisePath u = concatenate(p, constant_path(F, p.start()));
  EXPECT_EQ(u.end(), p.end());
  const LeafwisePath v = concatenate(constant_path(F, p.end()), p);
  EXPECT_EQ(v.end(), p.end());
  EXPECT_THROW(concatenate(p, p), InvalidArgument);
  EXPECT_THROW(concatenate(p, constant_path(germfol(), Eigen::VectorXd::Zero(1))), InvalidArgument);
}

TEST(Invert, IsAnInvolution) {
  const Foliation F = circles();
  const LeafwisePath p = make_path(F, Eigen::Vector2d(1, 0), 1.3, 0.0, {P("1 + t^2 - x*y", kXY)});
  const LeafwisePath pp = invert(invert(p));
  ASSERT_EQ(pp.segments().size(), p.segments().size());
  EXPECT_EQ(pp.segments()[0].coeffs[0], p.segments()[0].coeffs[0])
      << to_string(pp.segments()[0].coeffs[0]) << " vs " << to_string(p.segments()[0].coeffs[0]);
  for (double t : {0.0, 0.2, 0.65, 1.1, 1.3}) EXPECT_LT((pp.at(t) - p.at(t)).norm(), 1e-9);

  const LeafwisePath c = constant_path(F, Eigen::Vector2d(0.2, 0.1));
  const LeafwisePath ci = invert(c);
  EXPECT_EQ(ci.start(), c.start());
  EXPECT_EQ(ci.end(), c.end());
  EXPECT_TRUE(ci.segments()[0].coeffs[0].is_zero());
}

TEST(Invert, ReturnsToTheStartWhenReintegrated) {
  const Foliation F = circles();
  const LeafwisePath p = quarter(F, Eigen::Vector2d(1, 0));
  const LeafwisePath q = invert(p);
  EXPECT_LT((q.end() - p.start()).norm(), 1e-7);
  // Re-integrate the inverted coefficients instead of trusting the reversed trajectory.
  const LeafwisePath fresh = make_path(F, p.end(), p.duration(), p.segments()[0].margin, {Expr(-1.0)});
  EXPECT_LT((fresh.end() - p.start()).norm(), 1e-6);
  const BaseField X = q.field(0);
  const FlowResult r = integrate(X.a, kXY, q.start(), 0.0, q.duration());
  EXPECT_LT((r.endpoint() - p.start()).norm(), 1e-6);
  // Flowing the loop p^{-1} o p fixes the start point.
  const LeafwisePath loop = concatenate(q, p);
  EXPECT_LT((loop.end() - p.start()).norm(), 1e-6);
}

TEST(Exposure, EqualsWindowIntegral) {
  const Foliation F = circles();
  for (double d : {0.5, 1.0, 4.0}) {
    for (double eps : {0.0, d / 5, d / 8}) {
      const LeafwisePath p = make_path(F, Eigen::Vector2d(1, 0), d, eps, {Expr(1.0)});
      const double e = eps > 0 ? eps : d / 10;
      EXPECT_NEAR(exposure(p.segments()[0], 0), window_integral(d, e), 1e-10);
    }
  }
  const LeafwisePath p = make_path(F, Eigen::Vector2d(1, 0), 1.0, 0.0, {P("x", kXY)});
  EXPECT_THROW(exposure(p.segments()[0], 0), InvalidArgument);
}
