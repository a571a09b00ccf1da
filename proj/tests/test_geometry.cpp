#include <gtest/gtest.h>

#include <cmath>

#include "jetholo/geometry.hpp"
#include "test_support.hpp"

using namespace jetholo;
using jetholo::testing::ExprGen;

namespace {

const std::vector<std::string> kXY{"x", "y"};

Chart plane(double r = 2.0) { return Chart(kXY, Box({{-r, r}, {-r, r}})); }
Chart line() { return Chart({"x"}, Box({{-2, 2}})); }

BaseField F2(const std::string& a, const std::string& b) {
  return BaseField{{parse_expr(a, kXY), parse_expr(b, kXY)}};
}

BaseField F1(const std::string& a) {
  const std::vector<std::string> v{"x"};
  return BaseField{{parse_expr(a, v)}};
}

bool all_zero(const Chart& c, const BaseField& X, int n = 16) {
  UniformSource rng(7);
  for (int s = 0; s < n; ++s) {
    Eigen::VectorXd p(c.dim());
    for (int i = 0; i < c.dim(); ++i) p[i] = rng.uniform(-1.5, 1.5);
    if (evaluate(c, X, p).norm() > 1e-9) return false;
  }
  return true;
}

}  // namespace

TEST(Geometry, BracketExamples) {
  EXPECT_TRUE(all_zero(plane(), lie_bracket(plane(), F2("1", "0"), F2("0", "1"))));
  const BaseField br = lie_bracket(line(), F1("x"), F1("1"));
  EXPECT_EQ(to_string(br.a[0]), "-1");
  EXPECT_TRUE(all_zero(plane(), lie_bracket(plane(), F2("-y", "x"), F2("x", "y"))));
}

// Independent check of [x d/dx, d/dx] = -d/dx through flows: the commutator of flows
// Fl^Y_{-s} Fl^X_{-s} Fl^Y_s Fl^X_s (p) = p + s^2 [X,Y](p) + O(s^3), with closed-form flows
// Fl^{x d/dx}_s (x) = x e^s and Fl^{d/dx}_s (x) = x + s.
TEST(Geometry, BracketAgreesWithFlowCommutator) {
  const double x0 = 0.7;
  for (double s : {1e-2, 5e-3}) {
    double p = x0;
    p = p * std::exp(s);
    p = p + s;
    p = p * std::exp(-s);
    p = p - s;
    EXPECT_NEAR((p - x0) / (s * s), -1.0, 3 * s);
  }
}

TEST(Geometry, JacobiIdentity) {
  ExprGen gen(kXY, 101);
  const Chart c = plane();
  for (int trial = 0; trial < 10; ++trial) {
    BaseField X{{gen(2), gen(2)}}, Y{{gen(2), gen(2)}}, Z{{gen(2), gen(2)}};
    const BaseField a = lie_bracket(c, X, lie_bracket(c, Y, Z));
    const BaseField b = lie_bracket(c, Y, lie_bracket(c, Z, X));
    const BaseField d = lie_bracket(c, Z, lie_bracket(c, X, Y));
    UniformSource rng(trial);
    for (int s = 0; s < 16; ++s) {
      Eigen::Vector2d p(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
      const Eigen::VectorXd sum = evaluate(c, a, p) + evaluate(c, b, p) + evaluate(c, d, p);
      const double scale = 1.0 + evaluate(c, a, p).norm() + evaluate(c, b, p).norm();
      EXPECT_LT(sum.norm(), 1e-9 * scale);
    }
  }
}

TEST(Geometry, PushforwardAndBracketPreservation) {
  const Bundle B(plane(), {"f"}, Box({{-10, 10}}));
  const std::vector<std::string> names = B.total_names();
  auto P = [&](const std::string& a1, const std::string& a2, const std::string& b) {
    return ProjField{{parse_expr(a1, names), parse_expr(a2, names)}, {parse_expr(b, names)}};
  };
  EXPECT_EQ(to_string(pushforward(B, P("x", "0", "f")).a[0]), "x");
  EXPECT_TRUE(all_zero(plane(), pushforward(B, P("0", "0", "1"))));
  const BaseField rot = pushforward(B, P("-y", "x", "0"));
  EXPECT_EQ(to_string(rot.a[0]), "-y");
  EXPECT_EQ(to_string(rot.a[1]), "x");
  EXPECT_THROW(pushforward(B, P("f", "0", "0")), InvalidArgument);
  EXPECT_FALSE(is_projectable(B, P("x*f", "0", "0")));

  ExprGen base(kXY, 5), total(names, 6);
  const Chart c = plane();
  for (int trial = 0; trial < 10; ++trial) {
    ProjField X{{base(2), base(2)}, {total(2)}}, Y{{base(2), base(2)}, {total(2)}};
    const BaseField lhs = pushforward(B, lie_bracket(B, X, Y));
    const BaseField rhs = lie_bracket(c, pushforward(B, X), pushforward(B, Y));
    UniformSource rng(trial);
    for (int s = 0; s < 8; ++s) {
      Eigen::Vector2d p(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
      EXPECT_LT((evaluate(c, lhs, p) - evaluate(c, rhs, p)).norm(),
                1e-10 * (1 + evaluate(c, rhs, p).norm()));
    }
  }
}

TEST(Geometry, MembershipExamples) {
  const Chart c = plane();
  const Foliation circles(c, {"R"}, {F2("-y", "x")});
  const std::vector<Eigen::VectorXd> away{Eigen::Vector2d(1, 0), Eigen::Vector2d(-0.3, 0.8)};
  auto rep = membership_test(F2("-2*y", "2*x"), circles, away);
  EXPECT_TRUE(rep.all_in_span());
  EXPECT_LT(rep.worst, 1e-14);

  const std::vector<Eigen::VectorXd> origin{Eigen::Vector2d(0, 0)};
  rep = membership_test(F2("1", "0"), circles, origin);
  EXPECT_FALSE(rep.in_span[0]);
  EXPECT_DOUBLE_EQ(rep.residuals[0], 1.0);

  const auto samples = sample_points(c);
  rep = membership_test(BaseField::zero(2), circles, samples);
  EXPECT_TRUE(rep.all_in_span());
}

TEST(Geometry, InvolutivityExamples) {
  const Foliation trans(line(), {"X"}, {F1("1")});
  auto rep = involutivity_check(trans, sample_points(trans.chart));
  EXPECT_TRUE(rep.passed);
  EXPECT_EQ(rep.worst, 0.0);
  EXPECT_FALSE(rep.caveat.empty());

  const Foliation circles(plane(), {"R"}, {F2("-y", "x")});
  EXPECT_TRUE(involutivity_check(circles, sample_points(circles.chart)).passed);

  // <d/dx, x d/dy>: the bracket d/dy leaves the pointwise span exactly on x = 0.
  const Foliation bad(plane(), {"A", "B"}, {F2("1", "0"), F2("0", "x")});
  rep = involutivity_check(bad, sample_points(bad.chart));
  EXPECT_FALSE(rep.passed);
  ASSERT_FALSE(rep.failures.empty());
  for (const auto& f : rep.failures) {
    EXPECT_EQ(f.point[0], 0.0);
    EXPECT_DOUBLE_EQ(f.residual, 1.0);
  }
  EXPECT_EQ(rep.failures.size(), 5u);  // the x = 0 column of the 5x5 lattice
}

TEST(Geometry, SamplePointsAreDeterministicAndInside) {
  const Chart c(kXY, Box({{-1, 3}, {0.5, 2}}));
  const auto a = sample_points(c, 42);
  const auto b = sample_points(c, 42);
  ASSERT_EQ(a.size(), 25u + 32u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i], b[i]);
    EXPECT_TRUE(c.domain().contains(a[i]));
  }
  EXPECT_NE(sample_points(c, 43).back(), a.back());
}

TEST(Geometry, ValidationErrors) {
  EXPECT_THROW(Box({{1, 1}}), InvalidArgument);
  EXPECT_THROW(Chart({"x", "x"}, Box({{0, 1}, {0, 1}})), InvalidArgument);
  EXPECT_THROW(Chart({"t"}, Box({{0, 1}})), InvalidArgument);
  EXPECT_THROW(Bundle(line(), {"x"}, Box({{0, 1}})), InvalidArgument);
  EXPECT_THROW(Foliation(line(), {}, {}), InvalidArgument);
  EXPECT_THROW(Foliation(plane(), {"A"}, {F1("1")}), InvalidArgument);
}
