#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "jetholo/connection.hpp"
#include "jetholo/flow.hpp"
#include "jetholo/multiindex.hpp"
#include "jetholo/prolong.hpp"

namespace jetholo {

/// Allowed distance between a jet's base point and the start of the path it is transported
/// along; matches the accuracy to which transported base points follow the path.
inline constexpr double kBaseStartTol = 1e-6;

/// A point of the k-jet bundle: base coordinates and fibre jet coordinates in layout order.
struct JetPoint {
  JetLayout layout;
  Eigen::VectorXd x;
  Eigen::VectorXd jet;

  JetPoint(JetLayout layout, Eigen::VectorXd x, Eigen::VectorXd jet);

  int order() const { return layout.order(); }
  double operator[](const std::string& name) const;
};

/// Same point with only the coordinates of order <= l.
JetPoint truncate(const JetPoint& j, int l);

/// k-jet at x of a section given by one Expr per fibre coordinate over the base coordinates.
JetPoint jet_of_section(const Bundle& bundle, std::span<const Expr> section, const Eigen::VectorXd& x,
                        int k);

/// Time-stamped jet trajectory over [0, d] of a path.
struct JetPath {
  JetLayout layout;
  std::vector<double> times;
  /// Base coordinates then jet coordinates.
  std::vector<Eigen::VectorXd> states;
  int accepted_steps = 0;
  int rejected_steps = 0;
  /// Max distance between the base part and the path's own trajectory at the stored times.
  double base_deviation = 0.0;

  JetPoint endpoint() const;
};

/// Transport along leafwise paths for a fixed connection.
///
/// Prolonged generator lifts are computed once per order and cached; the cache is guarded by a
/// mutex so one Transporter may serve concurrent transports.
class Transporter {
 public:
  explicit Transporter(Connection c, OdeOptions opts = default_options());

  static OdeOptions default_options();

  const Connection& connection() const { return c_; }
  const OdeOptions& options() const { return opts_; }

  /// p^k(l(X_i)) for every generator.
  const std::vector<JetField>& prolonged_lifts(int k) const;

  /// Solves the jet-space transport equation along p starting from j0 (order j0.order()).
  /// The base point of j0 must be p.start() within kBaseStartTol. Throws FlowError on blowup or when the
  /// trajectory leaves the chart box or the order-0 fibre box.
  JetPath transport_ode(const LeafwisePath& p, const JetPoint& j0) const;

  JetPoint transport(const LeafwisePath& p, const JetPoint& j0) const;

 private:
  struct Compiled;
  const Compiled& compiled(int k) const;

  Connection c_;
  OdeOptions opts_;
  mutable std::mutex mu_;
  mutable std::map<int, std::shared_ptr<const Compiled>> cache_;
};

JetPath transport_ode(const Connection& c, const LeafwisePath& p, const JetPoint& j0, int k,
                      const OdeOptions& opts = Transporter::default_options());

JetPoint transport(const Connection& c, const LeafwisePath& p, const JetPoint& j0, int k,
                   const OdeOptions& opts = Transporter::default_options());

}  // namespace jetholo
