#include <gtest/gtest.h>

#include "jetholo/prolong.hpp"
#include "test_support.hpp"

using namespace jetholo;
using jetholo::testing::ExprGen;
using jetholo::testing::rel_close;

namespace {

Bundle line_bundle() { return Bundle(Chart({"x"}, Box({{-2, 2}})), {"f"}, Box({{-10, 10}})); }
Bundle plane_bundle() {
  return Bundle(Chart({"x", "y"}, Box({{-2, 2}, {-2, 2}})), {"f"}, Box({{-10, 10}}));
}

ProjField field(const Bundle& B, std::vector<std::string> a, std::vector<std::string> b) {
  const auto names = B.total_names();
  ProjField X;
  for (const auto& s : a) X.a.push_back(parse_expr(s, names));
  for (const auto& s : b) X.b.push_back(parse_expr(s, names));
  return X;
}

Expr J(const JetLayout& L, const std::string& s) {
  const auto names = L.all_names();
  return parse_expr(s, names);
}

std::vector<double> random_jet_point(const JetLayout& L, UniformSource& rng) {
  std::vector<double> p(L.n_base() + L.fibre_dim());
  for (auto& v : p) v = rng.uniform(-1.5, 1.5);
  return p;
}

ProjField random_field(const Bundle& B, std::uint64_t seed, int degree = 2) {
  ExprGen base(B.base().names(), seed), total(B.total_names(), seed + 1);
  ProjField X;
  for (int i = 0; i < B.n_base(); ++i) X.a.push_back(base.polynomial(degree));
  for (int a = 0; a < B.n_fibre(); ++a) X.b.push_back(total.polynomial(degree));
  return X;
}

void expect_fields_agree(const JetField& A, const JetField& B, std::uint64_t seed, double rel) {
  ASSERT_EQ(A.layout.all_names(), B.layout.all_names());
  UniformSource rng(seed);
  for (int s = 0; s < 16; ++s) {
    const auto p = random_jet_point(A.layout, rng);
    const Eigen::VectorXd va = evaluate(A, p), vb = evaluate(B, p);
    for (Eigen::Index i = 0; i < va.size(); ++i)
      EXPECT_TRUE(rel_close(va[i], vb[i], rel, 1e-10)) << i << ": " << va[i] << " vs " << vb[i];
  }
}

}  // namespace

TEST(TotalDerivative, Examples) {
  const JetLayout L1({"x"}, {"f"}, 1);
  EXPECT_EQ(to_string(total_derivative(J(L1, "f"), 0, L1)), "f_x");
  EXPECT_EQ(total_derivative(J(L1, "x*f"), 0, L1), simplify(J(L1, "f + x*f_x")));
  const JetLayout L2({"x"}, {"f"}, 2);
  EXPECT_EQ(to_string(total_derivative(total_derivative(J(L2, "f"), 0, L2), 0, L2)), "f_xx");
  EXPECT_THROW(total_derivative(J(L1, "f_x"), 0, L1), OrderOverflowError);
  EXPECT_THROW(total_derivative(J(L2, "f_xx + f"), 0, L2), OrderOverflowError);
  // t is inert
  const auto names = L1.all_names();
  std::vector<std::string> with_t = names;
  with_t.push_back("t");
  EXPECT_EQ(total_derivative(parse_expr("t*f", with_t), 0, L1), simplify(parse_expr("t*f_x", with_t)));
}

TEST(Prolong, TranslationHasNoJetComponents) {
  const Bundle B = line_bundle();
  for (int k = 1; k <= 4; ++k) {
    const JetField P = prolong(B, field(B, {"1"}, {"0"}), k);
    for (const auto& c : P.jet) EXPECT_TRUE(c.is_zero()) << to_string(c);
    EXPECT_TRUE(P.base[0].is_one());
  }
}

TEST(Prolong, ScalingExamples) {
  const Bundle B = line_bundle();
  const JetField P = prolong(B, field(B, {"x"}, {"f"}), 1);
  EXPECT_EQ(to_string(P.jet[0]), "f");
  EXPECT_TRUE(P.jet[1].is_zero()) << to_string(P.jet[1]);

  const JetField Q = prolong(B, field(B, {"x"}, {"0"}), 1);
  EXPECT_EQ(to_string(Q.jet[1]), "-f_x");
  // Order 2 of the same: phi_xx = D_x(-f_x) - f_xx = -2 f_xx
  const JetField Q2 = prolong(B, field(B, {"x"}, {"0"}), 2);
  EXPECT_EQ(to_string(Q2.jet[2]), "-2*f_xx");
}

TEST(Prolong, RotationFirstOrder) {
  const Bundle B = plane_bundle();
  const JetField P = prolong(B, field(B, {"-y", "x"}, {"0"}), 1);
  // phi_x = -(d_x a^j) f_j = -f_y, phi_y = f_x
  EXPECT_EQ(to_string(P.jet[1]), "-f_y");
  EXPECT_EQ(to_string(P.jet[2]), "f_x");
}

TEST(Prolong, OrderZeroIsTheFieldItself) {
  const Bundle B = plane_bundle();
  const ProjField X = field(B, {"x*y", "1"}, {"f^2 + x"});
  const JetField P = prolong(B, X, 0);
  ASSERT_EQ(P.jet.size(), 1u);
  EXPECT_EQ(P.jet[0], X.b[0]);
  EXPECT_EQ(P.base, X.a);
}

TEST(Prolong, RecursionMatchesClosedFormula) {
  const Bundle B = plane_bundle();
  for (int trial = 0; trial < 8; ++trial) {
    const ProjField X = random_field(B, 500 + trial);
    for (int k = 1; k <= 3; ++k)
      expect_fields_agree(prolong(B, X, k), prolong_direct(B, X, k), trial * 10 + k, 1e-9);
  }
  // A transcendental field with a non-affine fibre part.
  const ProjField X = field(B, {"sin(x)*y", "exp(x) - y^2"}, {"tanh(f)*x + f^2*y"});
  for (int k = 1; k <= 3; ++k) expect_fields_agree(prolong(B, X, k), prolong_direct(B, X, k), k, 1e-9);
}

TEST(Prolong, TwoFibreCoordinates) {
  const Bundle B(Chart({"x", "y"}, Box({{-1, 1}, {-1, 1}})), {"u", "v"}, Box({{-5, 5}, {-5, 5}}));
  const ProjField X = field(B, {"x^2 - y", "x*y"}, {"u*v + x", "v - y*u^2"});
  for (int k = 1; k <= 2; ++k) {
    expect_fields_agree(prolong(B, X, k), prolong_direct(B, X, k), k, 1e-9);
    expect_fields_agree(vertical_prolong(B, X, k), contact_apply(prolong(B, X, k)), k, 1e-9);
  }
}

TEST(VerticalProlong, Examples) {
  const Bundle B = line_bundle();
  const JetField V = vertical_prolong(B, field(B, {"0"}, {"1"}), 1);
  ASSERT_EQ(V.jet.size(), 1u);
  EXPECT_TRUE(V.jet[0].is_one());

  const JetField W = vertical_prolong(B, field(B, {"x"}, {"0"}), 1);
  EXPECT_EQ(W.jet[0], simplify(J(W.layout, "-x*f_x")));

  const JetField T = vertical_prolong(B, field(B, {"1"}, {"0"}), 2);
  EXPECT_EQ(to_string(T.jet[0]), "-f_x");
  EXPECT_EQ(to_string(T.jet[1]), "-f_xx");

  const Bundle P = plane_bundle();
  const JetField R = vertical_prolong(P, field(P, {"-y", "x"}, {"0"}), 1);
  EXPECT_EQ(R.jet[0], simplify(J(R.layout, "y*f_x - x*f_y")));

  EXPECT_TRUE(vertical_prolong(B, field(B, {"x"}, {"f"}), 0).jet.empty());
}

TEST(ContactApply, Examples) {
  const Bundle B = line_bundle();
  EXPECT_EQ(to_string(contact_apply(prolong(B, field(B, {"1"}, {"0"}), 1)).jet[0]), "-f_x");
  EXPECT_TRUE(contact_apply(prolong(B, field(B, {"0"}, {"1"}), 1)).jet[0].is_one());
  const ProjField X = field(B, {"x"}, {"f"});
  const JetField C = contact_apply(prolong(B, X, 1));
  EXPECT_EQ(C.jet[0], simplify(J(C.layout, "f - x*f_x")));
  EXPECT_EQ(C.jet[0], vertical_prolong(B, X, 1).jet[0]);
}

TEST(ContactApply, EqualsVerticalProlongation) {
  const Bundle B = plane_bundle();
  for (int trial = 0; trial < 8; ++trial) {
    const ProjField X = random_field(B, 900 + trial);
    for (int k = 1; k <= 3; ++k)
      expect_fields_agree(vertical_prolong(B, X, k), contact_apply(prolong(B, X, k)), trial + k, 1e-9);
  }
}

TEST(Prolong, ProjectableFamily) {
  const Bundle B = plane_bundle();
  for (int trial = 0; trial < 5; ++trial) {
    const ProjField X = random_field(B, 300 + trial);
    const JetField P3 = prolong(B, X, 3);
    for (int l = 0; l <= 3; ++l) {
      const JetField T = truncate(P3, l);
      const JetField Pl = prolong(B, X, l);
      ASSERT_EQ(T.jet.size(), Pl.jet.size());
      for (std::size_t i = 0; i < T.jet.size(); ++i) EXPECT_EQ(T.jet[i], Pl.jet[i]);
    }
  }
}

TEST(Prolong, BracketHomomorphism) {
  const Bundle B = plane_bundle();
  for (int trial = 0; trial < 6; ++trial) {
    const ProjField X = random_field(B, 700 + trial), Y = random_field(B, 800 + trial);
    for (int k = 1; k <= 2; ++k) {
      const JetField lhs = prolong(B, lie_bracket(B, X, Y), k);
      const JetField rhs = lie_bracket(prolong(B, X, k), prolong(B, Y, k));
      expect_fields_agree(lhs, rhs, trial * 3 + k, 1e-8);
    }
  }
}

TEST(Prolong, NodeCapIsEnforced) {
  const Bundle B = plane_bundle();
  const ProjField X = field(B, {"sin(x*y)", "exp(x)*cos(y)"}, {"tanh(f*x*y)"});
  EXPECT_THROW(prolong(B, X, 3, 50), ExpressionTooLarge);
  EXPECT_NO_THROW(prolong(B, X, 2));
}

TEST(Prolong, RejectsNonProjectable) {
  const Bundle B = line_bundle();
  EXPECT_THROW(prolong(B, field(B, {"f"}, {"0"}), 1), InvalidArgument);
  EXPECT_THROW(vertical_prolong(B, field(B, {"x*f"}, {"0"}), 1), InvalidArgument);
}

TEST(Prolong, FormatUsesJetNames) {
  const Bundle B = line_bundle();
  const std::string s = format(prolong(B, field(B, {"x"}, {"0"}), 1));
  EXPECT_NE(s.find("d/dx: x"), std::string::npos);
  EXPECT_NE(s.find("d/df_x: -f_x"), std::string::npos);
}
