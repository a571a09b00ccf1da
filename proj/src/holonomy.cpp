#include "jetholo/holonomy.hpp"

#include <algorithm>
#include <optional>

namespace jetholo {

namespace {

double gap(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).lpNorm<Eigen::Infinity>(); }

double jet_distance(const JetPoint& a, const JetPoint& b) { return std::max(gap(a.x, b.x), gap(a.jet, b.jet)); }

std::string point_text(const Eigen::VectorXd& x) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < x.size(); ++i) s += (i ? "," : "") + format_number(x[i]);
  return s + ")";
}

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Equivalent: return "equivalent";
    case Verdict::Distinct: return "distinct";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

std::string to_string(GroupoidLaw law) {
  switch (law) {
    case GroupoidLaw::Identity: return "identity";
    case GroupoidLaw::Inverse: return "inverse";
    case GroupoidLaw::Composition: return "composition";
  }
  return "?";
}

ProbeSet make_probes(const Connection& c, const Eigen::VectorXd& x, int k, std::uint64_t seed) {
  ProbeSet out{invariant_fibre(c, x, k), {}, {}, {}};
  const InvariantFibre& F = out.fibre;
  const int d = F.dimension();
  out.labels.emplace_back("particular");
  out.jets.push_back(F.point(Eigen::VectorXd::Zero(d)));
  for (int j = 0; j < d; ++j) {
    out.labels.push_back("basis " + F.layout().jet_names()[F.free[j]]);
    out.jets.push_back(F.point(Eigen::VectorXd::Unit(d, j)));
  }
  const int n_random = d > 0 ? kRandomProbes : 0;
  UniformSource rng(seed);
  for (int r = 0; r < n_random; ++r) {
    Eigen::VectorXd coeffs(d);
    for (auto& v : coeffs) v = rng.uniform(-1.0, 1.0);
    out.labels.push_back("random " + std::to_string(r));
    out.jets.push_back(F.point(coeffs));
  }
  out.description = "particular point, " + std::to_string(d) + " basis points and " + std::to_string(n_random) +
                    " random points of the " + std::to_string(d) + "-dimensional invariant fibre (jet fibre " +
                    std::to_string(F.fibre_dim()) + ") at " + point_text(x) +
                    "; the connection is affine in the fibre, so transports are affine and agreement on the "
                    "particular and basis points covers the whole invariant fibre";
  return out;
}

HolonomyReport holonomy_equivalent(const Transporter& T, const LeafwisePath& p1, const LeafwisePath& p2, int k,
                                   double tol, std::uint64_t seed) {
  if (k < 0) throw InvalidArgument("holonomy_equivalent: order must be >= 0");
  if (!(tol > 0)) throw InvalidArgument("holonomy_equivalent: tolerance must be positive");
  HolonomyReport rep;
  rep.order = k;
  rep.tol = tol;
  rep.source_gap = gap(p1.start(), p2.start());
  rep.range_gap = gap(p1.end(), p2.end());
  rep.source_match = rep.source_gap <= kEndpointTol;
  rep.range_match = rep.range_gap <= kEndpointTol;
  if (!rep.source_match || !rep.range_match) {
    rep.verdict = Verdict::Distinct;
    rep.note = rep.source_match ? "paths end at different points" : "paths start at different points";
    return rep;
  }
  std::optional<ProbeSet> probes;
  try {
    probes.emplace(make_probes(T.connection(), p1.start(), k, seed));
  } catch (const NoConservationLaws& e) {
    rep.verdict = Verdict::Inconclusive;
    rep.note = e.what();
    return rep;
  }
  rep.probe_description = probes->description;
  bool failed = false;
  for (std::size_t i = 0; i < probes->jets.size(); ++i) {
    ProbeResult pr{probes->labels[i], -1.0, {}};
    try {
      const JetPoint a = T.transport(p1, probes->jets[i]);
      const JetPoint b = T.transport(p2, probes->jets[i]);
      pr.discrepancy = gap(a.jet, b.jet);
      rep.worst = std::max(rep.worst, pr.discrepancy);
    } catch (const FlowError& e) {
      pr.error = e.what();
      failed = true;
    }
    rep.probes.push_back(std::move(pr));
  }
  if (rep.worst > 10 * tol)
    rep.verdict = Verdict::Distinct;
  else if (failed || rep.worst > tol)
    rep.verdict = Verdict::Inconclusive;
  else
    rep.verdict = Verdict::Equivalent;
  if (failed) rep.note = "some probe transports failed";
  return rep;
}

HolonomyReport holonomy_equivalent(const Connection& c, const LeafwisePath& p1, const LeafwisePath& p2, int k,
                                   double tol, std::uint64_t seed) {
  return holonomy_equivalent(Transporter(c), p1, p2, k, tol, seed);
}

HierarchyReport hierarchy_check(const Transporter& T, const LeafwisePath& p1, const LeafwisePath& p2, int k_max,
                                double tol, std::uint64_t seed) {
  if (k_max < 0) throw InvalidArgument("hierarchy_check: order must be >= 0");
  HierarchyReport rep;
  for (int k = 0; k <= k_max; ++k) rep.per_order.push_back(holonomy_equivalent(T, p1, p2, k, tol, seed));
  for (int k = 0; k <= k_max; ++k) {
    if (rep.per_order[k].verdict != Verdict::Equivalent) continue;
    for (int l = 0; l < k; ++l) {
      if (rep.per_order[l].verdict != Verdict::Distinct) continue;
      rep.monotone = false;
      rep.violations.push_back("equivalent at order " + std::to_string(k) + " but distinct at order " +
                               std::to_string(l));
    }
  }
  return rep;
}

HierarchyReport hierarchy_check(const Connection& c, const LeafwisePath& p1, const LeafwisePath& p2, int k_max,
                                double tol, std::uint64_t seed) {
  return hierarchy_check(Transporter(c), p1, p2, k_max, tol, seed);
}

GroupoidLawsReport groupoid_laws_check(const Transporter& T, std::span<const LeafwisePath> paths, int k, double tol,
                                       std::uint64_t seed) {
  GroupoidLawsReport rep;
  rep.order = k;
  rep.tol = tol;
  const Connection& c = T.connection();
  const auto run = [&](LawCheck check, const Eigen::VectorXd& source, const auto& compare) {
    try {
      const ProbeSet probes = make_probes(c, source, k, seed);
      for (const auto& j : probes.jets) check.worst = std::max(check.worst, compare(j));
      check.passed = check.worst <= tol;
    } catch (const NoConservationLaws& e) {
      check.error = std::string("no probes: ") + e.what();
    } catch (const FlowError& e) {
      check.passed = false;
      check.error = e.what();
    }
    rep.passed = rep.passed && check.passed;
    rep.checks.push_back(std::move(check));
  };
  const int n = static_cast<int>(paths.size());
  for (int i = 0; i < n; ++i) {
    const LeafwisePath& p = paths[i];
    const LeafwisePath id = constant_path(p.foliation(), p.start());
    run(LawCheck{GroupoidLaw::Identity, i, -1, 0.0, true, {}}, p.start(),
        [&](const JetPoint& j) { return jet_distance(T.transport(id, j), j); });
    const LeafwisePath inv = invert(p);
    run(LawCheck{GroupoidLaw::Inverse, i, -1, 0.0, true, {}}, p.start(),
        [&](const JetPoint& j) { return jet_distance(T.transport(inv, T.transport(p, j)), j); });
  }
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (gap(paths[a].end(), paths[b].start()) > kEndpointTol) continue;
      const LeafwisePath whole = concatenate(paths[b], paths[a], kEndpointTol);
      run(LawCheck{GroupoidLaw::Composition, a, b, 0.0, true, {}}, paths[a].start(), [&](const JetPoint& j) {
        return jet_distance(T.transport(whole, j), T.transport(paths[b], T.transport(paths[a], j)));
      });
    }
  }
  return rep;
}

GroupoidLawsReport groupoid_laws_check(const Connection& c, std::span<const LeafwisePath> paths, int k, double tol,
                                       std::uint64_t seed) {
  return groupoid_laws_check(Transporter(c), paths, k, tol, seed);
}

}  // namespace jetholo
