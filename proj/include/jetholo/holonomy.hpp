#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jetholo/flow.hpp"
#include "jetholo/invariants.hpp"
#include "jetholo/transport.hpp"

namespace jetholo {

inline constexpr double kHolonomyTol = 1e-5;
/// Distance below which path endpoints count as equal.
inline constexpr double kEndpointTol = 1e-6;
inline constexpr std::uint64_t kDefaultSeed = 20240611;
/// Random fibre points used as probes on top of the particular point and the basis.
inline constexpr int kRandomProbes = 8;

enum class Verdict { Equivalent, Distinct, Inconclusive };

std::string to_string(Verdict v);

/// Points of the invariant fibre at a base point on which transports are compared: the
/// particular solution, particular + each basis vector, and random combinations.
struct ProbeSet {
  InvariantFibre fibre;
  std::vector<std::string> labels;
  std::vector<JetPoint> jets;
  std::string description;
};

/// Throws NoConservationLaws when the fibre is empty and InvalidArgument for non-affine
/// connections.
ProbeSet make_probes(const Connection& c, const Eigen::VectorXd& x, int k, std::uint64_t seed = kDefaultSeed);

struct ProbeResult {
  std::string label;
  /// Max-norm difference of the endpoint jets; negative when a transport failed.
  double discrepancy = 0.0;
  std::string error;
};

struct HolonomyReport {
  int order = 0;
  double tol = kHolonomyTol;
  double source_gap = 0.0;
  double range_gap = 0.0;
  bool source_match = true;
  bool range_match = true;
  std::vector<ProbeResult> probes;
  double worst = 0.0;
  Verdict verdict = Verdict::Inconclusive;
  std::string probe_description;
  std::string note;
};

/// Compares the k-transports of two paths on probes of the invariant fibre at the common source.
/// Equivalent needs matching endpoints and every discrepancy <= tol; distinct needs mismatched
/// endpoints or some discrepancy > 10 tol; anything else is inconclusive. Equivalence is only
/// ever evidenced on samples.
HolonomyReport holonomy_equivalent(const Transporter& T, const LeafwisePath& p1, const LeafwisePath& p2, int k,
                                   double tol = kHolonomyTol, std::uint64_t seed = kDefaultSeed);

HolonomyReport holonomy_equivalent(const Connection& c, const LeafwisePath& p1, const LeafwisePath& p2, int k,
                                   double tol = kHolonomyTol, std::uint64_t seed = kDefaultSeed);

struct HierarchyReport {
  std::vector<HolonomyReport> per_order;
  /// No order k is equivalent while some lower order is distinct.
  bool monotone = true;
  std::vector<std::string> violations;
};

HierarchyReport hierarchy_check(const Transporter& T, const LeafwisePath& p1, const LeafwisePath& p2, int k_max,
                                double tol = kHolonomyTol, std::uint64_t seed = kDefaultSeed);

HierarchyReport hierarchy_check(const Connection& c, const LeafwisePath& p1, const LeafwisePath& p2, int k_max,
                                double tol = kHolonomyTol, std::uint64_t seed = kDefaultSeed);

enum class GroupoidLaw { Identity, Inverse, Composition };

std::string to_string(GroupoidLaw law);

struct LawCheck {
  GroupoidLaw law = GroupoidLaw::Identity;
  /// Indices into the path list; the second is -1 except for compositions (first runs second).
  int first = 0;
  int second = -1;
  double worst = 0.0;
  bool passed = true;
  std::string error;
};

struct GroupoidLawsReport {
  int order = 0;
  double tol = kHolonomyTol;
  std::vector<LawCheck> checks;
  bool passed = true;
};

/// For every path p: T(constant at p's source) = id and T(p^-1) T(p) = id on probes at the
/// source. For every ordered pair with paths[a].end() = paths[b].start():
/// T(b after a) = T(b) T(a).
GroupoidLawsReport groupoid_laws_check(const Transporter& T, std::span<const LeafwisePath> paths, int k,
                                       double tol = kHolonomyTol, std::uint64_t seed = kDefaultSeed);

GroupoidLawsReport groupoid_laws_check(const Connection& c, std::span<const LeafwisePath> paths, int k,
                                       double tol = kHolonomyTol, std::uint64_t seed = kDefaultSeed);

}  // namespace jetholo
