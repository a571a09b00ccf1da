#include "jetholo/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace jetholo {

JetPoint::JetPoint(JetLayout layout_, Eigen::VectorXd x_, Eigen::VectorXd jet_)
    : layout(std::move(layout_)), x(std::move(x_)), jet(std::move(jet_)) {
  if (x.size() != layout.n_base() || jet.size() != layout.fibre_dim())
    throw InvalidArgument("JetPoint: coordinate count does not match the layout");
}

double JetPoint::operator[](const std::string& name) const {
  const int j = layout.index_of(name);
  if (j >= 0) return jet[j];
  const auto& b = layout.base_names();
  const auto it = std::find(b.begin(), b.end(), name);
  if (it == b.end()) throw InvalidArgument("JetPoint: no coordinate named '" + name + "'");
  return x[it - b.begin()];
}

JetPoint truncate(const JetPoint& j, int l) {
  if (l < 0 || l > j.order()) throw InvalidArgument("truncate: order out of range");
  return JetPoint(j.layout.truncated(l), j.x, j.jet.head(j.layout.fibre_dim_up_to(l)));
}

JetPoint jet_of_section(const Bundle& bundle, std::span<const Expr> section, const Eigen::VectorXd& x,
                        int k) {
  if (static_cast<int>(section.size()) != bundle.n_fibre())
    throw InvalidArgument("jet_of_section: expected one expression per fibre coordinate");
  check_field_variables(section, bundle.base().names(), "section");
  const JetLayout L = jet_layout(bundle, k);
  const auto& names = bundle.base().names();
  VarEnv env;
  for (int i = 0; i < bundle.n_base(); ++i) env[names[i]] = x[i];
  env[kTimeVar] = 0.0;
  Eigen::VectorXd jet(L.fibre_dim());
  // Derivatives are built incrementally along the layout: D_{I} = d/dx_{last} D_{I minus last}.
  std::map<std::pair<int, MultiIndex>, Expr> cache;
  for (int e = 0; e < L.fibre_dim(); ++e) {
    const auto& [fibre, I] = L.entries()[e];
    Expr d;
    if (I.empty()) {
      d = section[fibre];
    } else {
      std::vector<int> idx(I.begin(), I.end());
      const int last = idx.back();
      idx.pop_back();
      d = simplify(diff(cache.at({fibre, MultiIndex(idx)}), names[last]));
    }
    cache.emplace(std::make_pair(fibre, I), d);
    jet[e] = eval(d, env);
  }
  return JetPoint(L, x, jet);
}

JetPoint JetPath::endpoint() const {
  const int n = layout.n_base();
  const Eigen::VectorXd& s = states.back();
  return JetPoint(layout, s.head(n), s.tail(s.size() - n));
}

struct Transporter::Compiled {
  std::vector<JetField> fields;
  std::vector<CompiledField> programs;
};

namespace {

std::vector<Expr> components(const JetField& V) {
  std::vector<Expr> out = V.base;
  out.insert(out.end(), V.jet.begin(), V.jet.end());
  return out;
}

std::vector<std::string> slots_for(const JetLayout& L) {
  auto s = L.all_names();
  s.emplace_back(kTimeVar);
  return s;
}

Box jet_domain(const Bundle& B, const JetLayout& L) {
  std::vector<Interval> axes = B.base().domain().axes();
  const double big = std::numeric_limits<double>::max();
  for (int e = 0; e < L.fibre_dim(); ++e) {
    const auto& entry = L.entries()[e];
    axes.push_back(entry.index.empty() ? B.fibre_domain()[entry.fibre] : Interval{-big, big});
  }
  return Box(std::move(axes));
}

bool time_only(const Expr& e) {
  for (const auto& v : free_variables(e))
    if (v != kTimeVar) return false;
  return true;
}

}  // namespace

Transporter::Transporter(Connection c, OdeOptions opts) : c_(std::move(c)), opts_(opts) {}

OdeOptions Transporter::default_options() {
  OdeOptions o;
  o.rtol = 1e-11;
  o.atol = 1e-11;
  return o;
}

const Transporter::Compiled& Transporter::compiled(int k) const {
  std::lock_guard lock(mu_);
  auto it = cache_.find(k);
  if (it != cache_.end()) return *it->second;
  auto comp = std::make_shared<Compiled>();
  const JetLayout L = jet_layout(c_.bundle(), k);
  const auto slots = slots_for(L);
  for (const auto& lift : c_.lifts()) {
    comp->fields.push_back(prolong(c_.bundle(), lift, k));
    const auto comps = components(comp->fields.back());
    comp->programs.emplace_back(comps, slots);
  }
  return *cache_.emplace(k, std::move(comp)).first->second;
}

const std::vector<JetField>& Transporter::prolonged_lifts(int k) const { return compiled(k).fields; }

JetPath Transporter::transport_ode(const LeafwisePath& p, const JetPoint& j0) const {
  const Bundle& B = c_.bundle();
  const int k = j0.order();
  const JetLayout L = jet_layout(B, k);
  if (j0.layout.all_names() != L.all_names())
    throw InvalidArgument("transport: jet point layout does not belong to this bundle");
  if (!same_foliation(p.foliation(), c_.foliation()))
    throw InvalidArgument("transport: path and connection have different foliations");
  const double gap = (j0.x - p.start()).lpNorm<Eigen::Infinity>();
  if (gap > kBaseStartTol)
    throw InvalidArgument("transport: jet base point differs from the path start by " + format_number(gap));

  const int n = B.n_base();
  const Eigen::Index dim = n + L.fibre_dim();
  const Box domain = jet_domain(B, L);
  const auto slots = slots_for(L);
  std::vector<double> buf(slots.size());

  JetPath out{L, {}, {}, 0, 0, 0.0};
  Eigen::VectorXd y(dim);
  y << p.start(), j0.jet;
  out.times.push_back(0.0);
  out.states.push_back(y);
  double offset = 0.0;

  for (const auto& seg : p.segments()) {
    const bool zero = std::all_of(seg.coeffs.begin(), seg.coeffs.end(), [](const Expr& e) { return e.is_zero(); });
    if (zero) {
      offset += seg.duration;
      out.times.push_back(offset);
      out.states.push_back(y);
      continue;
    }
    OdeRhs rhs;
    // Both branches keep their compiled programs alive for the integration below.
    std::vector<CompiledExpr> coeffs;
    std::vector<int> active;
    CompiledField combined;
    if (std::all_of(seg.coeffs.begin(), seg.coeffs.end(), time_only)) {
      // Coefficients constant in x commute with prolongation: reuse the cached generator lifts.
      const Compiled& comp = compiled(k);
      const std::vector<std::string> tslot{kTimeVar};
      for (std::size_t i = 0; i < seg.coeffs.size(); ++i) {
        if (seg.coeffs[i].is_zero()) continue;
        active.push_back(static_cast<int>(i));
        coeffs.emplace_back(seg.coeffs[i], tslot);
      }
      Eigen::VectorXd tmp(dim);
      rhs = [&, tmp](double t, const Eigen::VectorXd& s, Eigen::VectorXd& ds) mutable {
        for (Eigen::Index q = 0; q < dim; ++q) buf[q] = s[q];
        buf[dim] = t;
        ds.setZero();
        const double tv[1] = {t};
        for (std::size_t a = 0; a < active.size(); ++a) {
          const double ci = coeffs[a](tv);
          if (ci == 0.0) continue;
          comp.programs[active[a]](buf, tmp);
          ds += ci * tmp;
        }
      };
    } else {
      const JetField V = prolong(B, lift_combination(c_, seg.coeffs), k);
      const auto comps = components(V);
      combined = CompiledField(comps, slots);
      rhs = [&](double t, const Eigen::VectorXd& s, Eigen::VectorXd& ds) {
        for (Eigen::Index q = 0; q < dim; ++q) buf[q] = s[q];
        buf[dim] = t;
        combined(buf, ds);
      };
    }
    OdeOptions o = opts_;
    if (o.max_step <= 0.0) o.max_step = seg.duration / 50;
    const FlowResult r = integrate_ode(rhs, y, 0.0, seg.duration, o, &domain);
    out.accepted_steps += r.diagnostics().accepted;
    out.rejected_steps += r.diagnostics().rejected;
    if (!r.ok()) {
      const auto& d = r.diagnostics();
      throw FlowError(d.status, offset + d.t_stop, r.endpoint(),
                      "transport: " + to_string(d.status) + ": " + d.message);
    }
    for (std::size_t s = 1; s < r.times().size(); ++s) {
      out.times.push_back(offset + r.times()[s]);
      out.states.push_back(r.states()[s]);
    }
    y = r.endpoint();
    offset += seg.duration;
  }

  const double total = p.duration();
  for (std::size_t s = 0; s < out.times.size(); ++s) {
    const double t = std::min(out.times[s], total);
    out.base_deviation =
        std::max(out.base_deviation, (out.states[s].head(n) - p.at(t)).lpNorm<Eigen::Infinity>());
  }
  return out;
}

JetPoint Transporter::transport(const LeafwisePath& p, const JetPoint& j0) const {
  return transport_ode(p, j0).endpoint();
}

JetPath transport_ode(const Connection& c, const LeafwisePath& p, const JetPoint& j0, int k,
                      const OdeOptions& opts) {
  if (k != j0.order()) throw InvalidArgument("transport: order differs from the jet point's order");
  return Transporter(c, opts).transport_ode(p, j0);
}

JetPoint transport(const Connection& c, const LeafwisePath& p, const JetPoint& j0, int k,
                   const OdeOptions& opts) {
  return transport_ode(c, p, j0, k, opts).endpoint();
}

}  // namespace jetholo
