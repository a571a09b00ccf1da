#include "jetholo/prolong.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace jetholo {

namespace {

const Expr& zero_expr() {
  static const Expr z(0.0);
  return z;
}

Expr jet_var(const JetLayout& L, int fibre, const MultiIndex& I) {
  return Expr::variable(L.name(fibre, I));
}

void check_projfield(const Bundle& bundle, const ProjField& X, const char* what) {
  if (static_cast<int>(X.a.size()) != bundle.n_base() ||
      static_cast<int>(X.b.size()) != bundle.n_fibre())
    throw InvalidArgument(std::string(what) + ": field does not match the bundle dimensions");
  if (!is_projectable(bundle, X))
    throw InvalidArgument(std::string(what) + ": base components depend on fibre coordinates");
  const auto names = bundle.total_names();
  check_field_variables(X.a, bundle.base().names(), what);
  check_field_variables(X.b, names, what);
}

void check_cap(const Expr& e, std::size_t cap, const JetLayout& L, int idx) {
  if (e.size() > cap) {
    throw ExpressionTooLarge("prolongation component for " + L.jet_names()[idx] + " has " +
                             std::to_string(e.size()) + " nodes (cap " + std::to_string(cap) +
                             "); use a lower order");
  }
}

}  // namespace

const Expr& JetField::component(int fibre, const MultiIndex& index) const {
  const int idx = layout.index_of(fibre, index);
  if (idx < 0) throw InvalidArgument("JetField::component: index beyond the layout order");
  if (idx >= static_cast<int>(jet.size())) return zero_expr();
  return jet[idx];
}

JetLayout jet_layout(const Bundle& bundle, int k) {
  return JetLayout(bundle.base().names(), bundle.fibre_names(), k);
}

Expr total_derivative(const Expr& e, int i, const JetLayout& L) {
  if (i < 0 || i >= L.n_base()) throw InvalidArgument("total_derivative: base index out of range");
  const int k = L.order();
  const auto fv = free_variables(e);
  const std::set<std::string, std::less<>> used(fv.begin(), fv.end());
  std::vector<Expr> terms{diff(e, L.base_names()[i])};
  for (const auto& entry : L.entries()) {
    const std::string& name = L.name(entry.fibre, entry.index);
    if (!used.count(name)) continue;
    if (static_cast<int>(entry.index.order()) >= k) {
      throw OrderOverflowError("total_derivative: expression references " + name +
                               " of order " + std::to_string(k) +
                               "; its total derivative leaves the order-" + std::to_string(k) +
                               " jet bundle");
    }
    terms.push_back(jet_var(L, entry.fibre, entry.index.append(i)) * diff(e, name));
  }
  return simplify(sum(std::move(terms)));
}

Expr total_derivative(const Expr& e, const MultiIndex& I, const JetLayout& L) {
  Expr out = e;
  for (int i : I) out = total_derivative(out, i, L);
  return out;
}

JetField prolong(const Bundle& bundle, const ProjField& X, int k, std::size_t node_cap) {
  if (k < 0) throw InvalidArgument("prolong: order must be >= 0");
  check_projfield(bundle, X, "prolong");
  JetField out{jet_layout(bundle, k), JetFieldKind::Full, X.a, {}};
  const JetLayout& L = out.layout;
  const auto& entries = L.entries();
  out.jet.resize(entries.size());
  // Derivatives of base components, d a^j / d x^i (a never depends on fibre coordinates).
  std::vector<std::vector<Expr>> da(L.n_base(), std::vector<Expr>(L.n_base()));
  for (int i = 0; i < L.n_base(); ++i)
    for (int j = 0; j < L.n_base(); ++j) da[i][j] = diff(X.a[j], L.base_names()[i]);

  for (std::size_t idx = 0; idx < entries.size(); ++idx) {
    const auto& [alpha, I] = entries[idx];
    if (I.empty()) {
      out.jet[idx] = X.b[alpha];
      continue;
    }
    const int i = I[I.order() - 1];
    std::vector<int> head(I.begin(), I.end() - 1);
    const MultiIndex parent(std::move(head));
    const Expr& phi_parent = out.jet[L.index_of(alpha, parent)];
    std::vector<Expr> terms{total_derivative(phi_parent, i, L)};
    for (int j = 0; j < L.n_base(); ++j) {
      if (da[i][j].is_zero()) continue;
      terms.push_back(-(da[i][j] * jet_var(L, alpha, parent.append(j))));
    }
    out.jet[idx] = simplify(sum(std::move(terms)));
    check_cap(out.jet[idx], node_cap, L, static_cast<int>(idx));
  }
  return out;
}

JetField prolong_direct(const Bundle& bundle, const ProjField& X, int k) {
  if (k < 0) throw InvalidArgument("prolong_direct: order must be >= 0");
  check_projfield(bundle, X, "prolong_direct");
  JetField out{jet_layout(bundle, k), JetFieldKind::Full, X.a, {}};
  const JetLayout& L = out.layout;
  const int n = L.n_base();
  for (const auto& [alpha, I] : L.entries()) {
    if (static_cast<int>(I.order()) < k) {
      // D_I(b - a^i f_i) + a^i f_{Ii}
      std::vector<Expr> q{X.b[alpha]};
      for (int i = 0; i < n; ++i) q.push_back(-(X.a[i] * jet_var(L, alpha, MultiIndex({i}))));
      std::vector<Expr> terms{total_derivative(sum(std::move(q)), I, L)};
      for (int i = 0; i < n; ++i) terms.push_back(X.a[i] * jet_var(L, alpha, I.append(i)));
      out.jet.push_back(simplify(sum(std::move(terms))));
    } else {
      // D_I b - sum_{J strict} mult(J) D_{I\J}(a^i) f_{Ji}
      std::vector<Expr> terms{total_derivative(X.b[alpha], I, L)};
      for (const auto& st : strict_subsets(I)) {
        for (int i = 0; i < n; ++i) {
          const Expr da = total_derivative(X.a[i], st.complement, L);
          if (da.is_zero()) continue;
          terms.push_back(-(Expr(static_cast<double>(st.multiplicity)) * da *
                            jet_var(L, alpha, st.sub.append(i))));
        }
      }
      out.jet.push_back(simplify(sum(std::move(terms))));
    }
  }
  return out;
}

JetField vertical_prolong(const Bundle& bundle, const ProjField& X, int k) {
  if (k < 0) throw InvalidArgument("vertical_prolong: order must be >= 0");
  check_projfield(bundle, X, "vertical_prolong");
  JetField out{jet_layout(bundle, k), JetFieldKind::Vertical,
               std::vector<Expr>(bundle.n_base(), Expr(0.0)), {}};
  const JetLayout& L = out.layout;
  if (k == 0) return out;
  const int n = L.n_base();
  std::vector<Expr> q;  // b^alpha - a^i f^alpha_i, per alpha
  for (int alpha = 0; alpha < L.n_fibre(); ++alpha) {
    std::vector<Expr> terms{X.b[alpha]};
    for (int i = 0; i < n; ++i) terms.push_back(-(X.a[i] * jet_var(L, alpha, MultiIndex({i}))));
    q.push_back(simplify(sum(std::move(terms))));
  }
  const int count = L.fibre_dim_up_to(k - 1);
  for (int idx = 0; idx < count; ++idx) {
    const auto& [alpha, I] = L.entries()[idx];
    if (I.empty()) {
      out.jet.push_back(q[alpha]);
    } else {
      // Reuse the parent component: D_{I'i} = D_i D_{I'}.
      const int i = I[I.order() - 1];
      std::vector<int> head(I.begin(), I.end() - 1);
      out.jet.push_back(total_derivative(out.jet[L.index_of(alpha, MultiIndex(head))], i, L));
    }
  }
  return out;
}

JetField contact_apply(const JetField& V) {
  if (V.kind != JetFieldKind::Full) throw InvalidArgument("contact_apply: expects a full jet field");
  const JetLayout& L = V.layout;
  const int k = L.order();
  JetField out{L, JetFieldKind::Vertical, std::vector<Expr>(L.n_base(), Expr(0.0)), {}};
  if (k == 0) return out;
  const int count = L.fibre_dim_up_to(k - 1);
  for (int idx = 0; idx < count; ++idx) {
    const auto& [alpha, I] = L.entries()[idx];
    std::vector<Expr> terms{V.jet[idx]};
    for (int i = 0; i < L.n_base(); ++i) terms.push_back(-(jet_var(L, alpha, I.append(i)) * V.base[i]));
    out.jet.push_back(simplify(sum(std::move(terms))));
  }
  return out;
}

JetField truncate(const JetField& V, int l) {
  if (l < 0 || l > V.layout.order()) throw InvalidArgument("truncate: invalid target order");
  JetField out{V.layout.truncated(l), V.kind, V.base, {}};
  const int count = V.kind == JetFieldKind::Full
                        ? out.layout.fibre_dim()
                        : (l == 0 ? 0 : out.layout.fibre_dim_up_to(l - 1));
  out.jet.assign(V.jet.begin(), V.jet.begin() + count);
  return out;
}

JetField lie_bracket(const JetField& V, const JetField& W) {
  if (V.layout.all_names() != W.layout.all_names())
    throw InvalidArgument("lie_bracket: jet fields live on different jet bundles");
  const JetLayout& L = V.layout;
  const auto names = L.all_names();
  const int n = L.n_base();
  const int dim = static_cast<int>(names.size());
  auto padded = [&](const JetField& F) {
    std::vector<Expr> c(F.base);
    c.insert(c.end(), F.jet.begin(), F.jet.end());
    c.resize(dim, Expr(0.0));
    return c;
  };
  const auto v = padded(V), w = padded(W);
  std::vector<Expr> out(dim);
  for (int c = 0; c < dim; ++c) {
    std::vector<Expr> terms;
    for (int d = 0; d < dim; ++d) {
      if (!v[d].is_zero()) terms.push_back(v[d] * diff(w[c], names[d]));
      if (!w[d].is_zero()) terms.push_back(-(w[d] * diff(v[c], names[d])));
    }
    out[c] = simplify(sum(std::move(terms)));
  }
  const bool vertical = V.kind == JetFieldKind::Vertical && W.kind == JetFieldKind::Vertical;
  JetField r{L, vertical ? JetFieldKind::Vertical : JetFieldKind::Full,
             std::vector<Expr>(out.begin(), out.begin() + n),
             std::vector<Expr>(out.begin() + n, out.end())};
  if (vertical) r.jet.resize(L.order() == 0 ? 0 : L.fibre_dim_up_to(L.order() - 1));
  return r;
}

Eigen::VectorXd evaluate(const JetField& V, std::span<const double> point, double t) {
  const auto names = V.layout.all_names();
  if (point.size() != names.size()) throw InvalidArgument("evaluate: point has the wrong size");
  VarEnv env;
  for (std::size_t i = 0; i < names.size(); ++i) env[names[i]] = point[i];
  env[kTimeVar] = t;
  const auto n = V.base.size();
  Eigen::VectorXd out(static_cast<Eigen::Index>(names.size()));
  out.setZero();
  for (std::size_t i = 0; i < n; ++i) out[static_cast<Eigen::Index>(i)] = eval(V.base[i], env);
  for (std::size_t i = 0; i < V.jet.size(); ++i)
    out[static_cast<Eigen::Index>(n + i)] = eval(V.jet[i], env);
  return out;
}

std::string format(const JetField& V) {
  std::ostringstream os;
  const JetLayout& L = V.layout;
  for (int i = 0; i < L.n_base(); ++i) os << "d/d" << L.base_names()[i] << ": " << to_string(V.base[i]) << '\n';
  for (std::size_t i = 0; i < V.jet.size(); ++i)
    os << "d/d" << L.jet_names()[i] << ": " << to_string(V.jet[i]) << '\n';
  return os.str();
}

}  // namespace jetholo
