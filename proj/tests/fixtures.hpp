#pragma once

// Connections used across the test suites and the acceptance gate.

#include <string>
#include <vector>

#include "jetholo/connection.hpp"
#include "jetholo/flow.hpp"

namespace jetholo::fixtures {

inline std::vector<std::string> with_time(std::vector<std::string> names) {
  names.emplace_back(kTimeVar);
  return names;
}

inline Expr base_expr(const Chart& c, const std::string& s) { return parse_expr(s, with_time(c.names())); }

inline Expr total_expr(const Bundle& B, const std::string& s) {
  return parse_expr(s, with_time(B.total_names()));
}

inline BaseField base_field(const Chart& c, const std::vector<std::string>& comps) {
  BaseField X;
  for (const auto& s : comps) X.a.push_back(base_expr(c, s));
  return X;
}

inline ProjField proj_field(const Bundle& B, const std::vector<std::string>& a,
                            const std::vector<std::string>& b) {
  ProjField X;
  for (const auto& s : a) X.a.push_back(base_expr(B.base(), s));
  for (const auto& s : b) X.b.push_back(total_expr(B, s));
  return X;
}

inline Chart plane_chart(double r = 2.0) { return Chart({"x", "y"}, Box({{-r, r}, {-r, r}})); }
inline Chart line_chart(double lo = -2.0, double hi = 2.0) { return Chart({"x"}, Box({{lo, hi}})); }
inline Bundle scalar_bundle(const Chart& c, double r = 10.0) { return Bundle(c, {"f"}, Box({{-r, r}})); }

/// Rotation generator on the plane with the trivial lift.
inline Connection circles() {
  const Chart c = plane_chart();
  return Connection::trivial(scalar_bundle(c), Foliation(c, {"R"}, {base_field(c, {"-y", "x"})}));
}

/// Rotation lifted with fibre component x^2 + y^2 - 1: invariant 0-jets come back unchanged
/// around a loop through the unit circle, first derivatives do not.
inline Connection twisted_circles() {
  const Chart c = plane_chart();
  const Bundle B = scalar_bundle(c);
  return Connection(B, Foliation(c, {"R"}, {base_field(c, {"-y", "x"})}),
                    {proj_field(B, {"-y", "x"}, {"x^2 + y^2 - 1"})});
}

/// Line foliated by a field that vanishes identically on x <= 0.
inline Connection germfol() {
  const Chart c = line_chart();
  return Connection::trivial(scalar_bundle(c), Foliation(c, {"G"}, {base_field(c, {"bump(x;0,1)"})}));
}

inline Connection scaling() {
  const Chart c = line_chart(0.1, 10.0);
  return Connection::trivial(scalar_bundle(c), Foliation(c, {"S"}, {base_field(c, {"x"})}));
}

/// <d/dx, d/dy> on the plane lifted as d/dx + f d/df, d/dy + f d/df.
inline Connection regular_plane() {
  const Chart c = plane_chart();
  const Bundle B = scalar_bundle(c);
  return Connection(B, Foliation(c, {"X", "Y"}, {base_field(c, {"1", "0"}), base_field(c, {"0", "1"})}),
                    {proj_field(B, {"1", "0"}, {"f"}), proj_field(B, {"0", "1"}, {"f"})});
}

/// <d/dx> on the plane with the trivial lift.
inline Connection translation_plane() {
  const Chart c = plane_chart();
  return Connection::trivial(scalar_bundle(c), Foliation(c, {"X"}, {base_field(c, {"1", "0"})}));
}

/// d/dx lifted to d/dx + y^2 d/dy on the line times the line: incomplete.
inline Connection ylift() {
  const Chart c = line_chart();
  const Bundle B(c, {"y"}, Box({{-10, 10}}));
  return Connection(B, Foliation(c, {"X"}, {base_field(c, {"1"})}), {proj_field(B, {"1"}, {"y^2"})});
}

/// <d/dx, x d/dx> with l(d/dx) = d/dx + f d/df and l(x d/dx) = x d/dx.
inline Connection bad_bracket() {
  const Chart c = line_chart();
  const Bundle B = scalar_bundle(c);
  return Connection(B, Foliation(c, {"A", "B"}, {base_field(c, {"1"}), base_field(c, {"x"})}),
                    {proj_field(B, {"1"}, {"f"}), proj_field(B, {"x"}, {"0"})});
}

/// <d/dx, d/dy> with l(d/dx) = d/dx + y d/df and l(d/dy) = d/dy: the lifted bracket is -d/df.
inline Connection bad_bracket_plane() {
  const Chart c = plane_chart();
  const Bundle B = scalar_bundle(c);
  return Connection(B, Foliation(c, {"X", "Y"}, {base_field(c, {"1", "0"}), base_field(c, {"0", "1"})}),
                    {proj_field(B, {"1", "0"}, {"y"}), proj_field(B, {"0", "1"}, {"0"})});
}

/// Random leafwise path starting in `start_box`: coefficients a + b sin(w t), optionally times
/// (1 + x/4) in the first base coordinate. Retries when the trajectory leaves the chart.
inline LeafwisePath random_path(const Connection& c, UniformSource& rng, const Box& start_box,
                                bool x_dependent, double amplitude = 0.6) {
  const Chart& ch = c.foliation().chart;
  for (int attempt = 0; attempt < 50; ++attempt) {
    Eigen::VectorXd x0(ch.dim());
    for (int i = 0; i < ch.dim(); ++i) x0[i] = rng.uniform(start_box[i].lo, start_box[i].hi);
    std::vector<Expr> coeffs;
    for (int g = 0; g < c.foliation().size(); ++g) {
      std::string s = format_number(rng.uniform(-amplitude, amplitude)) + " + " +
                      format_number(rng.uniform(-amplitude / 2, amplitude / 2)) + "*sin(" +
                      format_number(rng.uniform(1, 4)) + "*t)";
      if (x_dependent) s = "(" + s + ")*(1 + " + ch.names()[0] + "/4)";
      coeffs.push_back(base_expr(ch, s));
    }
    try {
      return make_path(c.foliation(), x0, rng.uniform(0.5, 1.2), 0.0, std::move(coeffs));
    } catch (const FlowError&) {
    }
  }
  throw std::runtime_error("random_path: no admissible path found");
}

}  // namespace jetholo::fixtures
