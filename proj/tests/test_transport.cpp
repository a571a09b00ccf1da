#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <thread>

#include "fd_oracle.hpp"
#include "fixtures.hpp"
#include "jetholo/transport.hpp"
#include "test_support.hpp"

using namespace jetholo;
namespace fx = jetholo::fixtures;
using jetholo::oracle::fd_oracle;
using jetholo::testing::ExprGen;

namespace {

constexpr double kPi = std::numbers::pi;

LeafwisePath rotation(const Connection& c, const Eigen::VectorXd& x0, double angle) {
  return make_path(c.foliation(), x0, angle / 0.85, 0.0, {Expr(1.0)});
}

JetPoint jet(const Connection& c, const Eigen::VectorXd& x, std::vector<double> values) {
  int k = 0;
  while (jet_layout(c.bundle(), k).fibre_dim() < static_cast<int>(values.size())) ++k;
  return JetPoint(jet_layout(c.bundle(), k), x, Eigen::Map<Eigen::VectorXd>(values.data(), values.size()));
}

double max_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).lpNorm<Eigen::Infinity>(); }

}  // namespace

TEST(JetPoint, SectionJetsAndTruncation) {
  const Connection c = fx::circles();
  const std::vector<Expr> sigma{fx::base_expr(c.foliation().chart, "x^2 + y^2")};
  const JetPoint j = jet_of_section(c.bundle(), sigma, Eigen::Vector2d(1, 0), 2);
  ASSERT_EQ(j.jet.size(), 6);
  const Eigen::VectorXd expected = (Eigen::VectorXd(6) << 1, 2, 0, 2, 0, 2).finished();
  EXPECT_LT(max_diff(j.jet, expected), 1e-15);
  EXPECT_EQ(j["f_yy"], 2.0);
  EXPECT_EQ(j["x"], 1.0);
  EXPECT_THROW(j["g"], InvalidArgument);
  const JetPoint t = truncate(j, 1);
  EXPECT_EQ(t.jet.size(), 3);
  EXPECT_EQ(t["f_x"], 2.0);
  EXPECT_THROW(truncate(j, 3), InvalidArgument);
  EXPECT_THROW(JetPoint(j.layout, j.x, Eigen::VectorXd::Zero(2)), InvalidArgument);
}

TEST(Transport, TrivialLiftKeepsFibreValues) {
  const Connection c = fx::circles();
  UniformSource rng(1);
  for (int trial = 0; trial < 4; ++trial) {
    const LeafwisePath p = fx::random_path(c, rng, Box({{-1, 1}, {-1, 1}}), trial % 2 == 1);
    const JetPoint j0 = jet(c, p.start(), {rng.uniform(-3, 3)});
    const JetPoint j1 = transport(c, p, j0, 0);
    EXPECT_EQ(j1.jet[0], j0.jet[0]);
    EXPECT_LT(max_diff(j1.x, p.end()), 1e-6);
  }
}

TEST(Transport, QuarterRotationRotatesTheGradient) {
  const Connection c = fx::circles();
  const LeafwisePath p = rotation(c, Eigen::Vector2d(1, 0), kPi / 2);
  for (auto [cv, s] : {std::pair{0.5, 1.0}, std::pair{-2.0, 0.25}}) {
    const JetPoint j1 = transport(c, p, jet(c, p.start(), {cv, s, 0.0}), 1);
    EXPECT_LT(max_diff(j1.x, Eigen::Vector2d(0, 1)), 1e-6);
    EXPECT_NEAR(j1["f"], cv, 1e-6);
    EXPECT_NEAR(j1["f_x"], 0.0, 1e-6);
    EXPECT_NEAR(j1["f_y"], s, 1e-6);
  }
}

TEST(Transport, ConstantPathIsExactIdentity) {
  const Connection c = fx::regular_plane();
  const LeafwisePath p = constant_path(c.foliation(), Eigen::Vector2d(0.3, 0.2));
  const JetPoint j0 = jet(c, p.start(), {1, 2, 3, 4, 5, 6});
  const JetPoint j1 = transport(c, p, j0, 2);
  EXPECT_EQ(j1.jet, j0.jet);
  EXPECT_EQ(j1.x, j0.x);
  const LeafwisePath z = make_path(c.foliation(), p.start(), 2.0, 0.0, {Expr(0.0), Expr(0.0)});
  EXPECT_EQ(transport(c, z, j0, 2).jet, j0.jet);
}

TEST(Transport, PreconditionsAndFailures) {
  const Connection c = fx::circles();
  const LeafwisePath p = rotation(c, Eigen::Vector2d(1, 0), 1.0);
  EXPECT_THROW(transport(c, p, jet(c, Eigen::Vector2d(1 - 1e-5, 0), {1}), 0), InvalidArgument);
  EXPECT_THROW(transport(c, p, jet(c, p.start(), {1}), 1), InvalidArgument);
  const Connection g = fx::germfol();
  EXPECT_THROW(transport(g, p, jet(c, p.start(), {1}), 0), InvalidArgument);

  // The quadratic lift escapes the fibre box (and then blows up) before the exposure reaches 1.
  const Connection y = fx::ylift();
  const LeafwisePath q = make_path(y.foliation(), Eigen::VectorXd::Constant(1, -1.0), 2.0, 0.0, {Expr(1.0)});
  try {
    transport(y, q, jet(y, q.start(), {1.0}), 0);
    FAIL() << "expected a flow error";
  } catch (const FlowError& e) {
    EXPECT_NE(e.status(), FlowStatus::Ok);
  }
}

TEST(Transport, BaseProjectionFollowsThePath) {
  const Connection c = fx::twisted_circles();
  UniformSource rng(4);
  for (int trial = 0; trial < 4; ++trial) {
    const LeafwisePath p = fx::random_path(c, rng, Box({{-1, 1}, {-1, 1}}), trial >= 2);
    const JetPath jp = transport_ode(c, p, jet(c, p.start(), {0.1, 0.2, 0.3}), 1);
    EXPECT_LT(jp.base_deviation, 1e-6);
    for (std::size_t s = 1; s < jp.times.size(); ++s) EXPECT_GT(jp.times[s], jp.times[s - 1]);
    EXPECT_NEAR(jp.times.back(), p.duration(), 1e-12);
  }
}

TEST(FdOracle, SpecExamples) {
  // Trivial connection, constant section.
  const Connection c = fx::circles();
  const LeafwisePath p = rotation(c, Eigen::Vector2d(1, 0), 1.0);
  const std::vector<Expr> cst{Expr(2.5)};
  Eigen::VectorXd j = fd_oracle(c, p, cst, 2);
  EXPECT_NEAR(j[0], 2.5, 1e-6);
  for (int i = 1; i < 6; ++i) EXPECT_NEAR(j[i], 0.0, 1e-6);

  // r^2 is a first integral of rotations, so the transported section is r^2 again.
  const std::vector<Expr> r2{fx::base_expr(c.foliation().chart, "x^2 + y^2")};
  j = fd_oracle(c, p, r2, 2);
  const JetPoint expect = jet_of_section(c.bundle(), r2, p.end(), 2);
  EXPECT_LT(max_diff(j, expect.jet), 1e-5);

  // Scaling by exposure ln 2: tau(y) = y / 2 at y = 2.
  const Connection s = fx::scaling();
  const double d = std::log(2.0) / 0.85;
  const LeafwisePath q = make_path(s.foliation(), Eigen::VectorXd::Ones(1), d, 0.0, {Expr(1.0)});
  EXPECT_NEAR(q.end()[0], 2.0, 1e-8);
  const std::vector<Expr> id{fx::base_expr(s.foliation().chart, "x")};
  j = fd_oracle(s, q, id, 2);
  EXPECT_NEAR(j[0], 1.0, 1e-8);
  EXPECT_NEAR(j[1], 0.5, 1e-8);
  EXPECT_NEAR(j[2], 0.0, 1e-6);
  const JetPoint t = transport(s, q, jet_of_section(s.bundle(), id, q.start(), 2), 2);
  EXPECT_NEAR(t["f"], 1.0, 1e-7);
  EXPECT_NEAR(t["f_x"], 0.5, 1e-7);
  EXPECT_NEAR(t["f_xx"], 0.0, 1e-7);
  EXPECT_THROW(fd_oracle(s, q, id, 3), InvalidArgument);
}

// Both forms of the transported jet: the jet-space equation and derivatives of the composed flows.
TEST(Transport, AgreesWithFlowCompositionOracle) {
  struct Case {
    Connection c;
    Box start;
  };
  const std::vector<Case> cases{
      {fx::circles(), Box({{-1, 1}, {-1, 1}})},
      {fx::twisted_circles(), Box({{-1, 1}, {-1, 1}})},
      {fx::scaling(), Box({{0.6, 1.6}})},
      {fx::regular_plane(), Box({{-0.5, 0.5}, {-0.5, 0.5}})},
  };
  UniformSource rng(2024);
  int checked = 0;
  for (const auto& [c, start] : cases) {
    ExprGen gen(c.foliation().chart.names(), 77 + checked);
    for (int trial = 0; trial < 3; ++trial) {
      const LeafwisePath p = fx::random_path(c, rng, start, trial == 2);
      const std::vector<Expr> sigma{gen.polynomial(3)};
      for (int k = 0; k <= 2; ++k) {
        const JetPoint j = transport(c, p, jet_of_section(c.bundle(), sigma, p.start(), k), k);
        const Eigen::VectorXd ref = fd_oracle(c, p, sigma, k);
        EXPECT_LT(max_diff(j.jet, ref), 1e-4) << "sigma = " << to_string(sigma[0]) << ", k = " << k;
        ++checked;
      }
    }
  }
  EXPECT_EQ(checked, 36);
}

TEST(Transport, FunctorialUnderConcatenation) {
  const Connection c = fx::twisted_circles();
  UniformSource rng(8);
  for (int trial = 0; trial < 3; ++trial) {
    const LeafwisePath p2 = fx::random_path(c, rng, Box({{-1, 1}, {-1, 1}}), trial == 1);
    const LeafwisePath p1 = make_path(c.foliation(), p2.end(), 0.8, 0.0,
                                      {fx::base_expr(c.foliation().chart, "0.7 - 0.2*t")});
    const JetPoint j0 = jet(c, p2.start(), {0.3, -0.2, 0.5, 0.1, 0.4, -0.6});
    const JetPoint whole = transport(c, concatenate(p1, p2), j0, 2);
    const JetPoint stepwise = transport(c, p1, transport(c, p2, j0, 2), 2);
    EXPECT_LT(max_diff(whole.jet, stepwise.jet), 1e-5);
  }
}

TEST(Transport, InversePathUndoesTransport) {
  for (const Connection& c : {fx::twisted_circles(), fx::regular_plane()}) {
    UniformSource rng(9);
    const LeafwisePath p = fx::random_path(c, rng, Box({{-0.5, 0.5}, {-0.5, 0.5}}), true);
    const JetPoint j0 = jet(c, p.start(), {0.3, -0.2, 0.5, 0.1, 0.4, -0.6});
    const JetPoint back = transport(c, invert(p), transport(c, p, j0, 2), 2);
    EXPECT_LT(max_diff(back.jet, j0.jet), 1e-5);
    EXPECT_LT(max_diff(back.x, j0.x), 1e-6);
  }
}

TEST(Transport, TruncationCommutesWithTransport) {
  const Connection c = fx::twisted_circles();
  UniformSource rng(10);
  const LeafwisePath p = fx::random_path(c, rng, Box({{-1, 1}, {-1, 1}}), true);
  const JetPoint j2 = jet(c, p.start(), {0.3, -0.2, 0.5, 0.1, 0.4, -0.6});
  const JetPoint t2 = transport(c, p, j2, 2);
  for (int l = 0; l <= 1; ++l) {
    const JetPoint tl = transport(c, p, truncate(j2, l), l);
    EXPECT_LT(max_diff(truncate(t2, l).jet, tl.jet), 1e-6);
  }
}

TEST(Transporter, CachesAndIsSafeToShare) {
  const Transporter T(fx::twisted_circles());
  const auto& a = T.prolonged_lifts(2);
  const auto& b = T.prolonged_lifts(2);
  EXPECT_EQ(&a, &b);
  const LeafwisePath p = rotation(T.connection(), Eigen::Vector2d(0.8, 0.1), 2.0);
  std::vector<JetPoint> starts;
  for (int i = 0; i < 4; ++i) starts.push_back(jet(T.connection(), p.start(), {0.1 * i, 1, -1, 0.5, 0, 2}));
  std::vector<Eigen::VectorXd> serial, parallel(starts.size());
  for (const auto& s : starts) serial.push_back(T.transport(p, s).jet);
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < starts.size(); ++i)
    pool.emplace_back([&, i] { parallel[i] = T.transport(p, starts[i]).jet; });
  for (auto& th : pool) th.join();
  for (std::size_t i = 0; i < starts.size(); ++i) EXPECT_EQ(serial[i], parallel[i]);
}
