#include "jetholo/invariants.hpp"

#include <algorithm>
#include <cmath>

#include "jetholo/prolong.hpp"
#include "linalg.hpp"

namespace jetholo {

namespace {

// Vertical prolongations of every lift, compiled over (base, jets, t).
class ConstraintSystem {
 public:
  ConstraintSystem(const Connection& c, int k) : layout_(jet_layout(c.bundle(), k)) {
    if (k < 0) throw InvalidArgument("invariants: order must be >= 0");
    auto slots = layout_.all_names();
    slots.emplace_back(kTimeVar);
    const int count = layout_.fibre_dim_up_to(k - 1);
    for (int g = 0; g < c.foliation().size(); ++g) {
      const JetField V = vertical_prolong(c.bundle(), c.lifts()[g], k);
      for (int e = 0; e < count; ++e) {
        components_.push_back(V.jet[e]);
        labels_.push_back(c.foliation().generator_names[g] + "/" + layout_.jet_names()[e]);
      }
    }
    program_ = CompiledField(components_, slots);
    slots_ = std::move(slots);
  }

  const JetLayout& layout() const { return layout_; }
  const std::vector<std::string>& labels() const { return labels_; }
  int rows() const { return static_cast<int>(components_.size()); }

  Eigen::VectorXd operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
    std::vector<double> buf(slots_.size());
    std::copy(x.begin(), x.end(), buf.begin());
    std::copy(z.begin(), z.end(), buf.begin() + x.size());
    buf.back() = 0.0;
    return program_(buf);
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
    if (!jacobian_ready_) {
      std::vector<Expr> d;
      for (const auto& e : components_)
        for (const auto& name : layout_.jet_names()) d.push_back(simplify(diff(e, name)));
      jacobian_ = CompiledField(d, slots_);
      jacobian_ready_ = true;
    }
    std::vector<double> buf(slots_.size());
    std::copy(x.begin(), x.end(), buf.begin());
    std::copy(z.begin(), z.end(), buf.begin() + x.size());
    buf.back() = 0.0;
    const Eigen::VectorXd flat = jacobian_(buf);
    const int N = layout_.fibre_dim();
    Eigen::MatrixXd J(rows(), N);
    for (int r = 0; r < rows(); ++r)
      for (int j = 0; j < N; ++j) J(r, j) = flat[r * N + j];
    return J;
  }

 private:
  JetLayout layout_;
  std::vector<Expr> components_;
  std::vector<std::string> labels_;
  std::vector<std::string> slots_;
  CompiledField program_;
  mutable CompiledField jacobian_;
  mutable bool jacobian_ready_ = false;
};

void check_point(const Connection& c, const Eigen::VectorXd& x) {
  const Chart& ch = c.foliation().chart;
  if (x.size() != ch.dim()) throw InvalidArgument("invariants: point has the wrong dimension");
  if (!ch.domain().contains(x, 1e-12)) throw InvalidArgument("invariants: point lies outside the chart");
}

InvarianceConstraints linearize(const ConstraintSystem& sys, const Eigen::VectorXd& x) {
  const JetLayout& L = sys.layout();
  const int N = L.fibre_dim();
  InvarianceConstraints out{L, x, Eigen::MatrixXd(sys.rows(), N), Eigen::VectorXd(), sys.labels()};
  Eigen::VectorXd z = Eigen::VectorXd::Zero(N);
  out.offset = sys(x, z);
  for (int j = 0; j < N; ++j) {
    z[j] = 1.0;
    out.A.col(j) = sys(x, z) - out.offset;
    z[j] = 0.0;
  }
  // An affine system reproduces itself at any other point; a mismatch means the fibre
  // dependence is not affine after all.
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int j = 0; j < N; ++j) z[j] = u(rng);
  const Eigen::VectorXd direct = sys(x, z);
  const Eigen::VectorXd lin = out.A * z + out.offset;
  if (direct.size() > 0 && (direct - lin).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + direct.cwiseAbs().maxCoeff()))
    throw InvalidArgument("invariance_constraints: constraints are not affine in the jet coordinates; "
                          "use residual_check");
  return out;
}

InvariantFibre solve(InvarianceConstraints cons) {
  InvariantFibre out{std::move(cons), 0, {}, {}, {}, {}};
  const Eigen::MatrixXd& A = out.constraints.A;
  const int N = static_cast<int>(A.cols());
  out.particular = Eigen::VectorXd::Zero(N);
  std::vector<int> bound;
  if (A.rows() > 0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    out.singular_values = svd.singularValues();
    const double smax = out.singular_values.size() ? out.singular_values[0] : 0.0;
    const double cut = kRankTol * smax;
    const int rank = smax > 0 ? detail::numerical_rank(A, kRankTol) : 0;
    Eigen::MatrixXd chosen(A.rows(), 0);
    for (int j = N - 1; j >= 0 && static_cast<int>(bound.size()) < rank; --j) {
      Eigen::MatrixXd trial(A.rows(), chosen.cols() + 1);
      trial << chosen, A.col(j);
      Eigen::JacobiSVD<Eigen::MatrixXd> s(trial);
      if (s.singularValues()[s.singularValues().size() - 1] > cut) {
        chosen = std::move(trial);
        bound.push_back(j);
      }
    }
  }
  std::sort(bound.begin(), bound.end());
  for (int j = 0; j < N; ++j)
    if (!std::binary_search(bound.begin(), bound.end(), j)) out.free.push_back(j);
  out.rank = static_cast<int>(bound.size());

  Eigen::MatrixXd AB(A.rows(), bound.size());
  for (std::size_t q = 0; q < bound.size(); ++q) AB.col(q) = A.col(bound[q]);
  const auto solve_bound = [&](const Eigen::VectorXd& rhs) {
    return bound.empty() ? Eigen::VectorXd() : detail::least_squares(AB, rhs);
  };
  const Eigen::VectorXd zb = solve_bound(-out.constraints.offset);
  for (std::size_t q = 0; q < bound.size(); ++q) out.particular[bound[q]] = zb[q];
  out.basis = Eigen::MatrixXd::Zero(N, out.free.size());
  for (std::size_t f = 0; f < out.free.size(); ++f) {
    out.basis(out.free[f], f) = 1.0;
    const Eigen::VectorXd col = solve_bound(-A.col(out.free[f]));
    for (std::size_t q = 0; q < bound.size(); ++q) out.basis(bound[q], f) = col[q];
  }

  const double scale = 1.0 + (out.constraints.offset.size() ? out.constraints.offset.cwiseAbs().maxCoeff() : 0.0);
  if (out.residual(out.particular) > 1e-8 * scale) {
    std::string where;
    for (Eigen::Index i = 0; i < out.x().size(); ++i) where += (i ? "," : "") + format_number(out.x()[i]);
    throw NoConservationLaws("no conservation laws of order " + std::to_string(out.order()) + " at (" + where +
                             ")");
  }
  return out;
}

}  // namespace

JetPoint InvariantFibre::point(const Eigen::VectorXd& coeffs) const {
  if (coeffs.size() != basis.cols()) throw InvalidArgument("InvariantFibre::point: wrong coefficient count");
  return JetPoint(layout(), x(), particular + basis * coeffs);
}

double InvariantFibre::residual(const Eigen::VectorXd& z) const {
  if (constraints.A.rows() == 0) return 0.0;
  return (constraints.A * z + constraints.offset).cwiseAbs().maxCoeff();
}

InvarianceConstraints invariance_constraints(const Connection& c, const Eigen::VectorXd& x, int k) {
  if (!c.affine_fibre())
    throw InvalidArgument("invariance_constraints: connection is not affine in the fibre; use residual_check");
  check_point(c, x);
  return linearize(ConstraintSystem(c, k), x);
}

InvariantFibre invariant_fibre(const Connection& c, const Eigen::VectorXd& x, int k) {
  return solve(invariance_constraints(c, x, k));
}

double residual_check(const Connection& c, const JetPoint& j, int k) {
  if (k > j.order()) throw InvalidArgument("residual_check: jet order is below k");
  const JetPoint jk = truncate(j, k);
  const ConstraintSystem sys(c, k);
  const Eigen::VectorXd r = sys(jk.x, jk.jet);
  return r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
}

ConservationReport has_enough_conservation_laws(const Connection& c, std::span<const Eigen::VectorXd> samples,
                                                int k) {
  const ConstraintSystem sys(c, k);
  ConservationReport rep;
  rep.order = k;
  rep.fibre_dim = sys.layout().fibre_dim();
  rep.affine = c.affine_fibre();
  const int N = rep.fibre_dim;
  for (const auto& x : samples) {
    check_point(c, x);
    rep.points.push_back(x);
    if (rep.affine) {
      try {
        const InvariantFibre F = solve(linearize(sys, x));
        rep.dims.push_back(F.dimension());
        rep.ranks.push_back(F.rank);
        rep.notes.emplace_back();
      } catch (const NoConservationLaws& e) {
        rep.enough = false;
        rep.dims.push_back(-1);
        rep.ranks.push_back(-1);
        rep.notes.emplace_back(e.what());
      }
      continue;
    }
    Eigen::VectorXd z = Eigen::VectorXd::Zero(N);
    Eigen::VectorXd F = sys(x, z);
    for (int it = 0; it < 100 && F.size() && F.cwiseAbs().maxCoeff() > 1e-13; ++it) {
      z -= detail::least_squares(sys.jacobian(x, z), F);
      F = sys(x, z);
    }
    const bool solved = F.size() == 0 || F.cwiseAbs().maxCoeff() <= 1e-10;
    if (solved) {
      const int r = F.size() ? detail::numerical_rank(sys.jacobian(x, z), kRankTol) : 0;
      rep.dims.push_back(N - r);
      rep.ranks.push_back(r);
      rep.notes.emplace_back("local dimension at a Gauss-Newton solution");
    } else {
      rep.enough = false;
      rep.dims.push_back(-1);
      rep.ranks.push_back(-1);
      rep.notes.emplace_back("Gauss-Newton found no invariant jet (residual " +
                             format_number(F.cwiseAbs().maxCoeff()) + ")");
    }
  }
  return rep;
}

}  // namespace jetholo
