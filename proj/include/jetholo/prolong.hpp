#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "jetholo/geometry.hpp"
#include "jetholo/multiindex.hpp"
#include "jetholo/symexpr.hpp"

namespace jetholo {

/// Default per-component node cap for symbolic prolongation.
inline constexpr std::size_t kDefaultNodeCap = 20000;

/// A total derivative would need jet coordinates beyond the layout's order.
class OrderOverflowError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// A prolonged component exceeded the node cap.
class ExpressionTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class JetFieldKind { Full, Vertical };

/// Vector field on the k-jet bundle.
///
/// Full fields carry base components a^i and one jet component per layout entry. Vertical fields
/// have zero base part and components only for |I| <= k-1 (a prefix of the layout).
struct JetField {
  JetLayout layout;
  JetFieldKind kind = JetFieldKind::Full;
  std::vector<Expr> base;
  std::vector<Expr> jet;

  /// Component for f^alpha_I; zero for vertical fields at |I| = k.
  const Expr& component(int fibre, const MultiIndex& index) const;
};

/// Layout of J^k of the bundle.
JetLayout jet_layout(const Bundle& bundle, int k);

/// D_i^{(k)} e. Throws OrderOverflowError if e references order-k jet coordinates.
Expr total_derivative(const Expr& e, int i, const JetLayout& layout);

/// D_I e, applied as D_{i_1} ... D_{i_r}.
Expr total_derivative(const Expr& e, const MultiIndex& I, const JetLayout& layout);

/// k-jet prolongation via phi_{Ii} = D_i phi_I - (D_i a^j) f_{Ij}, phi_empty = b.
/// Time is an inert parameter. k = 0 returns X itself.
JetField prolong(const Bundle& bundle, const ProjField& X, int k,
                 std::size_t node_cap = kDefaultNodeCap);

/// Independent implementation of the closed coordinate formula: lower components from
/// D_I(b - a^i f_i) + a^i f_{Ii}, top components from D_I b minus the strict-subset sum with
/// Leibniz multiplicities. Used to validate prolong().
JetField prolong_direct(const Bundle& bundle, const ProjField& X, int k);

/// Vertical prolongation: components D_I(b^alpha - a^i f^alpha_i) for |I| <= k-1. For k = 0 the
/// field has no components.
JetField vertical_prolong(const Bundle& bundle, const ProjField& X, int k);

/// Contact form applied to a full jet field: components phi_I - f_{Ii} a^i for |I| <= k-1.
JetField contact_apply(const JetField& V);

/// Truncation of a full jet field to order l.
JetField truncate(const JetField& V, int l);

/// Lie bracket of two jet fields on the jet bundle (as vector fields in all jet coordinates).
JetField lie_bracket(const JetField& V, const JetField& W);

/// Evaluates the components of a jet field at a point given in layout order (base then jet).
Eigen::VectorXd evaluate(const JetField& V, std::span<const double> point, double t = 0.0);

/// Human-readable dump, one component per line ("d/dx: ...", "d/df_x: ...").
std::string format(const JetField& V);

}  // namespace jetholo
