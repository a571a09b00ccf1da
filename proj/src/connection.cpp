#include "jetholo/connection.hpp"

#include <algorithm>
#include <cmath>

#include "linalg.hpp"

namespace jetholo {

namespace {

// Second fibre derivatives vanish symbolically, or numerically at random total-space points when
// simplify() cannot decide.
bool is_affine_in_fibre(const Bundle& B, const std::vector<ProjField>& lifts) {
  const auto& fibres = B.fibre_names();
  const Box dom = B.total_domain();
  const auto names = B.total_names();
  for (const auto& L : lifts) {
    for (const auto& b : L.b) {
      for (std::size_t u = 0; u < fibres.size(); ++u) {
        const Expr du = diff(b, fibres[u]);
        for (std::size_t v = u; v < fibres.size(); ++v) {
          const Expr d2 = simplify(diff(du, fibres[v]));
          if (d2.is_zero()) continue;
          UniformSource rng(0xaff1e);
          for (int s = 0; s < 64; ++s) {
            VarEnv env;
            for (int i = 0; i < dom.dim(); ++i) env[names[i]] = rng.uniform(dom[i].lo, dom[i].hi);
            env[kTimeVar] = rng.uniform(0.0, 1.0);
            try {
              if (std::abs(eval(d2, env)) > 1e-9) return false;
            } catch (const EvalError&) {
            }
          }
        }
      }
    }
  }
  return true;
}

Eigen::MatrixXd generator_values(const Foliation& F, const Eigen::VectorXd& x) {
  Eigen::MatrixXd G(F.chart.dim(), F.size());
  for (int j = 0; j < F.size(); ++j) G.col(j) = evaluate(F.chart, F.generators[j], x);
  return G;
}

std::vector<Eigen::VectorXd> fibre_lattice(const Box& box) {
  const int m = box.dim();
  const double frac[3] = {0.25, 0.5, 0.75};
  std::vector<Eigen::VectorXd> out;
  std::vector<int> idx(m, 0);
  for (;;) {
    Eigen::VectorXd f(m);
    for (int a = 0; a < m; ++a) f[a] = box[a].lo + frac[idx[a]] * box[a].width();
    out.push_back(std::move(f));
    int d = 0;
    while (d < m && ++idx[d] == 3) idx[d++] = 0;
    if (d == m) break;
  }
  return out;
}

}  // namespace

Connection::Connection(Bundle bundle, Foliation foliation, std::vector<ProjField> lifts)
    : bundle_(std::move(bundle)), foliation_(std::move(foliation)), lifts_(std::move(lifts)) {
  if (foliation_.chart.names() != bundle_.base().names())
    throw InvalidArgument("connection: foliation chart and bundle base differ");
  if (lifts_.size() != foliation_.generators.size())
    throw InvalidArgument("connection: expected one lift per generator (" +
                          std::to_string(foliation_.size()) + "), got " + std::to_string(lifts_.size()));
  const auto names = bundle_.total_names();
  for (std::size_t i = 0; i < lifts_.size(); ++i) {
    const auto& L = lifts_[i];
    const std::string what = "lift of " + foliation_.generator_names[i];
    if (static_cast<int>(L.a.size()) != bundle_.n_base() || static_cast<int>(L.b.size()) != bundle_.n_fibre())
      throw InvalidArgument(what + ": wrong number of components");
    check_field_variables(L.a, bundle_.base().names(), what + " (base part)");
    check_field_variables(L.b, names, what + " (fibre part)");
  }
  affine_ = is_affine_in_fibre(bundle_, lifts_);
}

Connection Connection::trivial(Bundle bundle, Foliation foliation) {
  std::vector<ProjField> lifts;
  for (const auto& g : foliation.generators) {
    ProjField L;
    L.a = g.a;
    L.b.assign(bundle.n_fibre(), Expr(0.0));
    lifts.push_back(std::move(L));
  }
  return Connection(std::move(bundle), std::move(foliation), std::move(lifts));
}

Eigen::VectorXd evaluate(const Bundle& bundle, const ProjField& X, const Eigen::VectorXd& p, double t) {
  const auto names = bundle.total_names();
  VarEnv env;
  for (std::size_t i = 0; i < names.size(); ++i) env[names[i]] = p[static_cast<Eigen::Index>(i)];
  env[kTimeVar] = t;
  Eigen::VectorXd out(X.a.size() + X.b.size());
  Eigen::Index k = 0;
  for (const auto& e : X.a) out[k++] = eval(e, env);
  for (const auto& e : X.b) out[k++] = eval(e, env);
  return out;
}

ProjField lift_combination(const Connection& c, std::span<const Expr> coeffs) {
  if (static_cast<int>(coeffs.size()) != c.foliation().size())
    throw InvalidArgument("lift_combination: expected one coefficient per generator");
  check_field_variables(coeffs, c.bundle().base().names(), "lift_combination coefficient");
  const int n = c.bundle().n_base(), m = c.bundle().n_fibre();
  auto combine = [&](auto member, int count) {
    std::vector<Expr> out;
    for (int k = 0; k < count; ++k) {
      std::vector<Expr> terms;
      for (std::size_t i = 0; i < coeffs.size(); ++i) {
        const Expr& comp = (c.lifts()[i].*member)[k];
        if (coeffs[i].is_zero() || comp.is_zero()) continue;
        terms.push_back(coeffs[i] * comp);
      }
      out.push_back(simplify(sum(std::move(terms))));
    }
    return out;
  };
  ProjField X;
  X.a = combine(&ProjField::a, n);
  X.b = combine(&ProjField::b, m);
  return X;
}

RightInverseReport validate_right_inverse(const Connection& c, std::span<const Eigen::VectorXd> samples,
                                          double tol) {
  RightInverseReport rep;
  const auto& F = c.foliation();
  rep.per_generator.assign(F.size(), 0.0);
  rep.points_checked = static_cast<int>(samples.size());
  for (int i = 0; i < F.size(); ++i) {
    const BaseField lifted{c.lifts()[i].a};
    for (const auto& x : samples) {
      const double r =
          (evaluate(F.chart, lifted, x) - evaluate(F.chart, F.generators[i], x)).lpNorm<Eigen::Infinity>();
      rep.per_generator[i] = std::max(rep.per_generator[i], r);
    }
    rep.worst = std::max(rep.worst, rep.per_generator[i]);
  }
  rep.passed = rep.worst <= tol;
  return rep;
}

BracketReport validate_bracket_preserving(const Connection& c, std::span<const Eigen::VectorXd> samples,
                                          double tol) {
  BracketReport rep;
  rep.caveat =
      "pointwise check at sample points: passing is evidence, not proof, of bracket preservation";
  const Bundle& B = c.bundle();
  const Foliation& F = c.foliation();
  const int n = B.n_base(), r = F.size();
  const auto fibres = fibre_lattice(B.fibre_domain());
  rep.points_checked = static_cast<int>(samples.size() * fibres.size());

  for (int i = 0; i < r; ++i) {
    for (int j = i + 1; j < r; ++j) {
      ++rep.pairs_checked;
      const BaseField Z = lie_bracket(F.chart, F.generators[i], F.generators[j]);
      const ProjField W = lie_bracket(B, c.lifts()[i], c.lifts()[j]);
      for (const auto& x : samples) {
        const Eigen::MatrixXd G = generator_values(F, x);
        const Eigen::VectorXd z = evaluate(F.chart, Z, x);
        const Eigen::VectorXd lambda0 = detail::least_squares(G, z);
        if ((G * lambda0 - z).norm() > tol * (1.0 + z.norm())) {
          rep.outside_span += static_cast<int>(fibres.size());
          continue;
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeFullV);
        const int rank = detail::numerical_rank(G, 1e-10);
        const Eigen::MatrixXd N = svd.matrixV().rightCols(r - rank);

        for (const auto& f : fibres) {
          Eigen::VectorXd p(n + f.size());
          p << x, f;
          Eigen::MatrixXd L(p.size(), r);
          for (int k = 0; k < r; ++k) L.col(k) = evaluate(B, c.lifts()[k], p);
          const Eigen::VectorXd v = evaluate(B, W, p);
          const Eigen::VectorXd d = v - L * lambda0;
          const double res = N.cols() == 0 ? d.norm() : detail::span_residual(L * N, d);
          rep.worst = std::max(rep.worst, res);
          if (res > tol * (1.0 + v.norm())) {
            rep.passed = false;
            rep.failures.push_back({i, j, p, res});
          } else if (N.cols() > 0) {
            ++rep.indeterminate;
          }
        }
      }
    }
  }
  return rep;
}

GuardReport flow_domain_guard(const Connection& c, const ProjField& field, const Eigen::VectorXd& start,
                              double t_max, const std::optional<Box>& fibre_box, const OdeOptions& opts) {
  const Bundle& B = c.bundle();
  const int n = B.n_base(), m = B.n_fibre();
  if (start.size() != n + m) throw InvalidArgument("flow_domain_guard: start point has wrong dimension");
  if (!is_projectable(B, field)) throw InvalidArgument("flow_domain_guard: field is not projectable");
  const Box box = fibre_box.value_or(B.fibre_domain());
  if (box.dim() != m) throw InvalidArgument("flow_domain_guard: fibre box has wrong dimension");

  std::vector<Expr> comps = field.a;
  comps.insert(comps.end(), field.b.begin(), field.b.end());
  std::vector<std::string> slots = B.total_names();
  slots.emplace_back(kTimeVar);
  const CompiledField X(comps, slots);
  std::vector<double> buf(slots.size());
  const OdeRhs rhs = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    for (int k = 0; k < n + m; ++k) buf[k] = y[k];
    buf[n + m] = t;
    X(buf, dy);
  };
  const FlowResult r = integrate_ode(rhs, start, 0.0, t_max, opts);

  GuardReport rep;
  rep.status = r.diagnostics().status;
  rep.t_stop = r.diagnostics().t_stop;
  rep.message = r.diagnostics().message;
  auto fibre_in = [&](const Eigen::VectorXd& y) { return box.contains(y.tail(m)); };
  const auto& ts = r.times();
  const auto& ys = r.states();
  for (std::size_t s = 0; s < ts.size(); ++s) {
    if (fibre_in(ys[s])) continue;
    double lo = s == 0 ? ts[0] : ts[s - 1], hi = ts[s];
    if (s > 0) {
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (fibre_in(r.at(mid))) lo = mid;
        else hi = mid;
      }
    }
    rep.exited = true;
    rep.exit_time = hi;
    rep.exit_point = r.at(hi);
    break;
  }
  if (rep.blowup()) {
    rep.message += "; the lifted flow is not complete along this field (fibre coordinates escape in "
                   "finite time, as for a quadratic fibre component f' = f^2)";
  }
  return rep;
}

}  // namespace jetholo
