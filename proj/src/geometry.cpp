#include "jetholo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "jetholo/errors.hpp"
#include "linalg.hpp"

namespace jetholo {

Box::Box(std::vector<Interval> axes) : axes_(std::move(axes)) {
  for (const auto& iv : axes_) {
    if (!(std::isfinite(iv.lo) && std::isfinite(iv.hi)) || !(iv.lo < iv.hi))
      throw InvalidArgument("Box: every interval needs lo < hi (nonempty interior)");
  }
}

bool Box::contains(const Eigen::Ref<const Eigen::VectorXd>& p, double slack) const {
  if (p.size() != dim()) return false;
  for (int i = 0; i < dim(); ++i)
    if (!axes_[i].contains(p[i], slack)) return false;
  return true;
}

Eigen::VectorXd Box::center() const {
  Eigen::VectorXd c(dim());
  for (int i = 0; i < dim(); ++i) c[i] = 0.5 * (axes_[i].lo + axes_[i].hi);
  return c;
}

namespace {

void check_names(const std::vector<std::string>& names, std::set<std::string>& seen,
                 const char* what) {
  for (const auto& n : names) {
    if (n.empty()) throw InvalidArgument(std::string(what) + ": empty coordinate name");
    if (n == kTimeVar) throw InvalidArgument(std::string(what) + ": 't' is reserved for time");
    if (!seen.insert(n).second)
      throw InvalidArgument(std::string(what) + ": duplicate coordinate name '" + n + "'");
  }
}

}  // namespace

Chart::Chart(std::vector<std::string> names, Box domain)
    : names_(std::move(names)), domain_(std::move(domain)) {
  if (names_.empty()) throw InvalidArgument("Chart: dimension must be >= 1");
  if (domain_.dim() != dim()) throw InvalidArgument("Chart: box dimension does not match names");
  std::set<std::string> seen;
  check_names(names_, seen, "Chart");
}

Bundle::Bundle(Chart base, std::vector<std::string> fibre_names, Box fibre_domain)
    : base_(std::move(base)),
      fibre_names_(std::move(fibre_names)),
      fibre_domain_(std::move(fibre_domain)) {
  if (fibre_names_.empty()) throw InvalidArgument("Bundle: fibre dimension must be >= 1");
  if (fibre_domain_.dim() != n_fibre())
    throw InvalidArgument("Bundle: fibre box dimension does not match names");
  std::set<std::string> seen(base_.names().begin(), base_.names().end());
  check_names(fibre_names_, seen, "Bundle");
}

std::vector<std::string> Bundle::total_names() const {
  std::vector<std::string> out = base_.names();
  out.insert(out.end(), fibre_names_.begin(), fibre_names_.end());
  return out;
}

Box Bundle::total_domain() const {
  std::vector<Interval> axes = base_.domain().axes();
  axes.insert(axes.end(), fibre_domain_.axes().begin(), fibre_domain_.axes().end());
  return Box(std::move(axes));
}

BaseField BaseField::zero(int n) { return BaseField{std::vector<Expr>(n, Expr(0.0))}; }

ProjField ProjField::zero(int n_base, int n_fibre) {
  return ProjField{std::vector<Expr>(n_base, Expr(0.0)), std::vector<Expr>(n_fibre, Expr(0.0))};
}

Foliation::Foliation(Chart c, std::vector<std::string> names, std::vector<BaseField> gens)
    : chart(std::move(c)), generator_names(std::move(names)), generators(std::move(gens)) {
  if (generators.empty()) throw InvalidArgument("Foliation: at least one generator required");
  if (generator_names.size() != generators.size())
    throw InvalidArgument("Foliation: generator names and fields differ in count");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < generators.size(); ++i) {
    if (!seen.insert(generator_names[i]).second)
      throw InvalidArgument("Foliation: duplicate generator '" + generator_names[i] + "'");
    if (generators[i].dim() != chart.dim())
      throw InvalidArgument("Foliation: generator '" + generator_names[i] +
                            "' has the wrong number of components");
    check_field_variables(generators[i].a, chart.names(), "generator " + generator_names[i]);
  }
}

int Foliation::find(std::string_view name) const {
  for (std::size_t i = 0; i < generator_names.size(); ++i)
    if (generator_names[i] == name) return static_cast<int>(i);
  return -1;
}

void check_field_variables(std::span<const Expr> components, std::span<const std::string> allowed,
                           std::string_view what) {
  for (const auto& c : components) {
    for (const auto& v : free_variables(c)) {
      if (v == kTimeVar) continue;
      if (std::find(allowed.begin(), allowed.end(), v) == allowed.end())
        throw InvalidArgument(std::string(what) + ": component references '" + v +
                              "', which is not allowed here");
    }
  }
}

bool is_projectable(const Bundle& bundle, const ProjField& X) {
  for (const auto& a : X.a)
    for (const auto& f : bundle.fibre_names())
      if (depends_on(a, f)) return false;
  return true;
}

BaseField lie_bracket(const Chart& chart, const BaseField& X, const BaseField& Y) {
  const int n = chart.dim();
  if (X.dim() != n || Y.dim() != n) throw InvalidArgument("lie_bracket: dimension mismatch");
  BaseField out;
  for (int k = 0; k < n; ++k) {
    std::vector<Expr> terms;
    for (int i = 0; i < n; ++i) {
      const auto& xi = chart.names()[i];
      terms.push_back(X.a[i] * diff(Y.a[k], xi));
      terms.push_back(-(Y.a[i] * diff(X.a[k], xi)));
    }
    out.a.push_back(simplify(sum(std::move(terms))));
  }
  return out;
}

ProjField lie_bracket(const Bundle& bundle, const ProjField& X, const ProjField& Y) {
  const int n = bundle.n_base(), m = bundle.n_fibre();
  if (static_cast<int>(X.a.size()) != n || static_cast<int>(Y.a.size()) != n ||
      static_cast<int>(X.b.size()) != m || static_cast<int>(Y.b.size()) != m)
    throw InvalidArgument("lie_bracket: dimension mismatch");
  const auto names = bundle.total_names();
  auto xc = [&](const ProjField& F, int i) -> const Expr& { return i < n ? F.a[i] : F.b[i - n]; };
  auto component = [&](int k) {
    std::vector<Expr> terms;
    for (int i = 0; i < n + m; ++i) {
      terms.push_back(xc(X, i) * diff(xc(Y, k), names[i]));
      terms.push_back(-(xc(Y, i) * diff(xc(X, k), names[i])));
    }
    return simplify(sum(std::move(terms)));
  };
  ProjField out;
  for (int k = 0; k < n; ++k) out.a.push_back(component(k));
  for (int k = 0; k < m; ++k) out.b.push_back(component(n + k));
  return out;
}

BaseField pushforward(const Bundle& bundle, const ProjField& X) {
  if (static_cast<int>(X.a.size()) != bundle.n_base())
    throw InvalidArgument("pushforward: wrong number of base components");
  for (std::size_t i = 0; i < X.a.size(); ++i)
    for (const auto& f : bundle.fibre_names())
      if (depends_on(X.a[i], f))
        throw InvalidArgument("pushforward: base component " + std::to_string(i) +
                              " depends on fibre coordinate '" + f + "' (not projectable)");
  return BaseField{X.a};
}

CompiledField::CompiledField(std::span<const Expr> components, std::span<const std::string> slots) {
  exprs_.reserve(components.size());
  for (const auto& c : components) exprs_.emplace_back(c, slots);
}

void CompiledField::operator()(std::span<const double> slots, Eigen::Ref<Eigen::VectorXd> out) const {
  for (std::size_t i = 0; i < exprs_.size(); ++i) out[static_cast<Eigen::Index>(i)] = exprs_[i](slots);
}

Eigen::VectorXd CompiledField::operator()(std::span<const double> slots) const {
  Eigen::VectorXd out(size());
  (*this)(slots, out);
  return out;
}

Eigen::VectorXd evaluate(const Chart& chart, const BaseField& X, const Eigen::VectorXd& x, double t) {
  VarEnv env;
  for (int i = 0; i < chart.dim(); ++i) env[chart.names()[i]] = x[i];
  env[kTimeVar] = t;
  Eigen::VectorXd out(X.dim());
  for (int i = 0; i < X.dim(); ++i) out[i] = eval(X.a[i], env);
  return out;
}

UniformSource::UniformSource(std::uint64_t seed) : engine_(seed) {}

double UniformSource::next() {
  // 53 high bits; avoids the implementation-defined std::uniform_real_distribution.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::vector<Eigen::VectorXd> sample_points(const Chart& chart, std::uint64_t seed, int lattice,
                                           int n_random) {
  const int n = chart.dim();
  const auto& box = chart.domain();
  std::vector<Eigen::VectorXd> out;
  if (lattice >= 1) {
    std::vector<int> idx(n, 0);
    for (;;) {
      Eigen::VectorXd p(n);
      for (int i = 0; i < n; ++i) {
        p[i] = lattice == 1 ? 0.5 * (box[i].lo + box[i].hi)
                            : box[i].lo + box[i].width() * idx[i] / (lattice - 1);
      }
      out.push_back(std::move(p));
      int d = 0;
      while (d < n && ++idx[d] == lattice) idx[d++] = 0;
      if (d == n) break;
    }
  }
  UniformSource rng(seed);
  for (int r = 0; r < n_random; ++r) {
    Eigen::VectorXd p(n);
    for (int i = 0; i < n; ++i) p[i] = rng.uniform(box[i].lo, box[i].hi);
    out.push_back(std::move(p));
  }
  return out;
}

bool MembershipReport::all_in_span() const {
  return std::all_of(in_span.begin(), in_span.end(), [](bool b) { return b; });
}

namespace {

Eigen::MatrixXd generator_matrix(const Foliation& F, const Eigen::VectorXd& x) {
  Eigen::MatrixXd G(F.chart.dim(), F.size());
  for (int j = 0; j < F.size(); ++j) G.col(j) = evaluate(F.chart, F.generators[j], x);
  return G;
}

}  // namespace

MembershipReport membership_test(const BaseField& Y, const Foliation& F,
                                 std::span<const Eigen::VectorXd> samples, double tol) {
  MembershipReport rep;
  for (const auto& x : samples) {
    const Eigen::VectorXd y = evaluate(F.chart, Y, x);
    const double r = detail::span_residual(generator_matrix(F, x), y);
    rep.residuals.push_back(r);
    rep.in_span.push_back(r <= tol * (1.0 + y.norm()));
    rep.worst = std::max(rep.worst, r);
  }
  return rep;
}

InvolutivityReport involutivity_check(const Foliation& F, std::span<const Eigen::VectorXd> samples,
                                      double tol) {
  InvolutivityReport rep;
  rep.caveat =
      "pointwise check at sample points: passing is necessary but not sufficient for closure under "
      "brackets with smooth coefficients";
  rep.points_checked = static_cast<int>(samples.size());
  for (int i = 0; i < F.size(); ++i) {
    for (int j = i + 1; j < F.size(); ++j) {
      ++rep.pairs_checked;
      const BaseField br = lie_bracket(F.chart, F.generators[i], F.generators[j]);
      const auto m = membership_test(br, F, samples, tol);
      rep.worst = std::max(rep.worst, m.worst);
      for (std::size_t s = 0; s < samples.size(); ++s) {
        if (!m.in_span[s]) {
          rep.passed = false;
          rep.failures.push_back({i, j, samples[s], m.residuals[s]});
        }
      }
    }
  }
  return rep;
}

}  // namespace jetholo
