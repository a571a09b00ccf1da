#include "jetholo/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "jetholo/errors.hpp"

namespace jetholo {

std::string to_string(FlowStatus s) {
  switch (s) {
    case FlowStatus::Ok: return "ok";
    case FlowStatus::DomainExit: return "domain exit";
    case FlowStatus::Blowup: return "blowup";
    case FlowStatus::MaxSteps: return "max steps exceeded";
    case FlowStatus::EvalFailure: return "evaluation failure";
  }
  return "unknown";
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

double scaled_norm(const Eigen::VectorXd& v, const Eigen::VectorXd& y0, const Eigen::VectorXd& y1,
                   const OdeOptions& o) {
  if (v.size() == 0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double sc = o.atol + o.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = v[i] / sc;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(v.size()));
}

Eigen::VectorXd hermite(double t, double ta, double tb, const Eigen::VectorXd& ya,
                        const Eigen::VectorXd& yb, const Eigen::VectorXd& fa,
                        const Eigen::VectorXd& fb) {
  const double h = tb - ta;
  if (h == 0.0) return ya;
  const double s = (t - ta) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2,
               h11 = s3 - s2;
  return h00 * ya + h10 * h * fa + h01 * yb + h11 * h * fb;
}

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

Eigen::VectorXd FlowResult::at(double t) const {
  if (times_.empty()) throw InvalidArgument("FlowResult::at: empty trajectory");
  if (times_.size() == 1) return states_.front();
  const bool forward = times_.back() >= times_.front();
  const double lo = forward ? times_.front() : times_.back();
  const double hi = forward ? times_.back() : times_.front();
  const double span = hi - lo;
  if (t < lo - 1e-12 * std::max(1.0, span) || t > hi + 1e-12 * std::max(1.0, span))
    throw InvalidArgument("FlowResult::at: time outside the integrated interval");
  t = std::clamp(t, lo, hi);
  // First index j with times_[j] >= t (forward) or <= t (backward).
  std::size_t j;
  if (forward) {
    j = static_cast<std::size_t>(std::lower_bound(times_.begin(), times_.end(), t) - times_.begin());
  } else {
    j = static_cast<std::size_t>(
        std::lower_bound(times_.begin(), times_.end(), t, std::greater<>()) - times_.begin());
  }
  if (j == 0) return states_.front();
  if (j >= times_.size()) return states_.back();
  if (times_[j] == t) return states_[j];
  return hermite(t, times_[j - 1], times_[j], states_[j - 1], states_[j], derivs_[j - 1], derivs_[j]);
}

FlowResult FlowResult::reversed(double t_total) const {
  FlowResult r;
  r.diag_ = diag_;
  for (std::size_t i = times_.size(); i-- > 0;) {
    r.times_.push_back(t_total - times_[i]);
    r.states_.push_back(states_[i]);
    r.derivs_.push_back(-derivs_[i]);
  }
  r.diag_.t_stop = r.times_.empty() ? 0.0 : r.times_.back();
  return r;
}

FlowResult FlowResult::constant(const Eigen::VectorXd& y, double t0, double t1) {
  FlowResult r;
  r.times_ = {t0, t1};
  r.states_ = {y, y};
  r.derivs_ = {Eigen::VectorXd::Zero(y.size()), Eigen::VectorXd::Zero(y.size())};
  r.diag_.t_stop = t1;
  return r;
}

FlowResult integrate_ode(const OdeRhs& rhs, const Eigen::VectorXd& y0, double t0, double t1,
                         const OdeOptions& opts, const Box* domain) {
  FlowResult res;
  auto& diag = res.diag_;
  const Eigen::Index n = y0.size();
  const double dir = t1 >= t0 ? 1.0 : -1.0;
  const double total = std::abs(t1 - t0);
  const double eps = std::numeric_limits<double>::epsilon();

  diag.t_stop = t0;
  if (domain && !domain->contains(y0)) {
    res.times_ = {t0};
    res.states_ = {y0};
    res.derivs_ = {Eigen::VectorXd::Zero(n)};
    diag.status = FlowStatus::DomainExit;
    diag.message = "initial point outside the domain box";
    return res;
  }
  Eigen::VectorXd f0(n);
  try {
    rhs(t0, y0, f0);
  } catch (const EvalError& e) {
    res.times_ = {t0};
    res.states_ = {y0};
    res.derivs_ = {Eigen::VectorXd::Zero(n)};
    diag.status = FlowStatus::EvalFailure;
    diag.message = e.what();
    return res;
  }
  res.times_.push_back(t0);
  res.states_.push_back(y0);
  res.derivs_.push_back(f0);
  if (total == 0.0) return res;

  const double max_step = opts.max_step > 0.0 ? std::min(opts.max_step, total) : total;

  // Initial step size (Hairer, Norsett & Wanner, II.4).
  double h;
  {
    const double d0 = scaled_norm(y0, y0, y0, opts), d1 = scaled_norm(f0, y0, y0, opts);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, max_step);
    Eigen::VectorXd y1 = y0 + dir * h0 * f0, f1(n);
    double d2 = 0.0;
    try {
      rhs(t0 + dir * h0, y1, f1);
      d2 = scaled_norm(f1 - f0, y0, y0, opts) / h0;
    } catch (const EvalError&) {
      d2 = 0.0;
    }
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    h = std::min({100 * h0, h1, max_step});
  }

  Eigen::VectorXd k1 = f0, k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), y(n), ynew(n), err(n);
  y = y0;
  double t = t0;
  std::string last_eval_error;

  while (dir * (t1 - t) > 0.0) {
    if (diag.accepted + diag.rejected >= opts.max_steps) {
      diag.status = FlowStatus::MaxSteps;
      diag.message = "step budget of " + std::to_string(opts.max_steps) + " exhausted";
      break;
    }
    const double remaining = std::abs(t1 - t);
    h = std::min({h, max_step, remaining});
    if (remaining - h < 1e-12 * std::max(1.0, std::abs(t1))) h = remaining;
    if (h < 16 * eps * std::max(1.0, std::abs(t))) {
      if (!last_eval_error.empty()) {
        diag.status = FlowStatus::EvalFailure;
        diag.message = "step size underflow after evaluation failures: " + last_eval_error;
      } else {
        diag.status = FlowStatus::Blowup;
        diag.message = "step size underflow at t = " + format_number(t) +
                       " (probable finite-time blowup)";
      }
      break;
    }
    const double hs = dir * h;
    bool stage_failed = false;
    try {
      rhs(t + c2 * hs, y + hs * (a21 * k1), k2);
      rhs(t + c3 * hs, y + hs * (a31 * k1 + a32 * k2), k3);
      rhs(t + c4 * hs, y + hs * (a41 * k1 + a42 * k2 + a43 * k3), k4);
      rhs(t + c5 * hs, y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), k5);
      rhs(t + hs, y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), k6);
      ynew = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      rhs(t + hs, ynew, k7);
    } catch (const EvalError& e) {
      stage_failed = true;
      last_eval_error = e.what();
    }
    double en = std::numeric_limits<double>::infinity();
    if (!stage_failed && finite(ynew) && finite(k7)) {
      err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      en = scaled_norm(err, y, ynew, opts);
    }
    if (!(en <= 1.0)) {
      ++diag.rejected;
      h *= std::isfinite(en) ? std::max(0.2, 0.9 * std::pow(en, -0.2)) : 0.25;
      continue;
    }
    // accepted
    ++diag.accepted;
    diag.max_error = std::max(diag.max_error, en);
    const double tnew = (h == remaining) ? t1 : t + hs;
    if (domain && !domain->contains(ynew)) {
      // Locate the first exit on the Hermite interpolant by bisection.
      double lo = 0.0, hi = 1.0;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const Eigen::VectorXd ym = hermite(t + mid * (tnew - t), t, tnew, y, ynew, k1, k7);
        if (domain->contains(ym)) lo = mid;
        else hi = mid;
      }
      const double te = t + hi * (tnew - t);
      const Eigen::VectorXd ye = hermite(te, t, tnew, y, ynew, k1, k7);
      res.times_.push_back(te);
      res.states_.push_back(ye);
      Eigen::VectorXd fe = k7;
      try {
        rhs(te, ye, fe);
      } catch (const EvalError&) {
      }
      res.derivs_.push_back(fe);
      diag.status = FlowStatus::DomainExit;
      diag.t_stop = te;
      diag.message = "trajectory left the domain box at t = " + format_number(te);
      return res;
    }
    t = tnew;
    y = ynew;
    k1 = k7;
    res.times_.push_back(t);
    res.states_.push_back(y);
    res.derivs_.push_back(k1);
    if (y.lpNorm<Eigen::Infinity>() > opts.blowup_norm) {
      diag.status = FlowStatus::Blowup;
      diag.message = "state norm exceeded " + format_number(opts.blowup_norm) + " at t = " +
                     format_number(t) + " (probable finite-time blowup)";
      break;
    }
    last_eval_error.clear();
    h *= en == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(en, -0.2)));
  }
  diag.t_stop = t;
  return res;
}

FlowResult integrate(std::span<const Expr> field, std::span<const std::string> coords,
                     const Eigen::VectorXd& x0, double t0, double t1, const OdeOptions& opts,
                     const Box* domain) {
  if (field.size() != coords.size() || static_cast<Eigen::Index>(coords.size()) != x0.size())
    throw InvalidArgument("integrate: field, coordinates and initial point differ in size");
  std::vector<std::string> slots(coords.begin(), coords.end());
  slots.emplace_back(kTimeVar);
  const CompiledField F(field, slots);
  const std::size_t n = coords.size();
  std::vector<double> buf(n + 1);
  const OdeRhs rhs = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    for (std::size_t i = 0; i < n; ++i) buf[i] = y[static_cast<Eigen::Index>(i)];
    buf[n] = t;
    F(buf, dy);
  };
  FlowResult r = integrate_ode(rhs, x0, t0, t1, opts, domain);
  if (!r.ok()) {
    const auto& d = r.diagnostics();
    throw FlowError(d.status, d.t_stop, r.endpoint(), "integrate: " + to_string(d.status) + ": " + d.message);
  }
  return r;
}

Expr window(double d, double eps) {
  const Expr t = Expr::variable(kTimeVar);
  return bump(t, eps / 2, eps) * (Expr(1.0) - bump(t, d - eps, d - eps / 2));
}

double window_integral(double d, double eps) { return d - 1.5 * eps; }

namespace {

bool time_only(const Expr& e) {
  for (const auto& v : free_variables(e))
    if (v != kTimeVar) return false;
  return true;
}

BaseField segment_field(const Foliation& F, const std::vector<Expr>& coeffs) {
  BaseField X = BaseField::zero(F.chart.dim());
  for (int k = 0; k < F.chart.dim(); ++k) {
    std::vector<Expr> terms;
    for (int i = 0; i < F.size(); ++i) {
      if (coeffs[i].is_zero() || F.generators[i].a[k].is_zero()) continue;
      terms.push_back(coeffs[i] * F.generators[i].a[k]);
    }
    X.a[k] = simplify(sum(std::move(terms)));
  }
  return X;
}

}  // namespace

bool same_foliation(const Foliation& a, const Foliation& b) {
  if (a.chart.names() != b.chart.names() || a.generator_names != b.generator_names) return false;
  for (int i = 0; i < a.size(); ++i)
    if (a.generators[i].a != b.generators[i].a) return false;
  return true;
}

const Eigen::VectorXd& LeafwisePath::end() const {
  return segments_.empty() ? start_ : segments_.back().trajectory.endpoint();
}

double LeafwisePath::duration() const {
  double d = 0.0;
  for (const auto& s : segments_) d += s.duration;
  return d;
}

BaseField LeafwisePath::field(std::size_t segment) const {
  return segment_field(foliation_, segments_.at(segment).coeffs);
}

Eigen::VectorXd LeafwisePath::at(double t) const {
  double offset = 0.0;
  for (std::size_t s = 0; s < segments_.size(); ++s) {
    const double d = segments_[s].duration;
    if (t <= offset + d || s + 1 == segments_.size())
      return segments_[s].trajectory.at(std::clamp(t - offset, 0.0, d));
    offset += d;
  }
  return start_;
}

Expr LeafwisePath::combined_coefficient(int generator) const {
  std::vector<Expr> terms;
  double offset = 0.0;
  const Expr t = Expr::variable(kTimeVar);
  for (const auto& s : segments_) {
    const Expr& c = s.coeffs.at(generator);
    if (!c.is_zero()) terms.push_back(substitute(c, {{kTimeVar, t - Expr(offset)}}));
    offset += s.duration;
  }
  return simplify(sum(std::move(terms)));
}

bool LeafwisePath::time_only_coefficients() const {
  for (const auto& s : segments_)
    for (const auto& c : s.coeffs)
      if (!time_only(c)) return false;
  return true;
}

LeafwisePath make_path(const Foliation& F, const Eigen::VectorXd& x0, double duration,
                       double margin, std::vector<Expr> coeffs, const OdeOptions& opts) {
  if (!(duration > 0.0) || !std::isfinite(duration))
    throw InvalidArgument("make_path: duration must be positive");
  if (margin <= 0.0) margin = duration / 10;
  if (!(margin < duration / 4))
    throw InvalidArgument("make_path: sitting margin must lie in (0, duration/4)");
  if (static_cast<int>(coeffs.size()) != F.size())
    throw InvalidArgument("make_path: expected one coefficient per generator");
  if (x0.size() != F.chart.dim() || !F.chart.domain().contains(x0))
    throw InvalidArgument("make_path: start point outside the chart domain");
  check_field_variables(coeffs, F.chart.names(), "make_path coefficient");

  const Expr w = window(duration, margin);
  PathSegment seg;
  seg.start = x0;
  seg.duration = duration;
  seg.margin = margin;
  for (auto& c : coeffs) seg.coeffs.push_back(c.is_zero() ? Expr(0.0) : simplify(c * w));

  const BaseField X = segment_field(F, seg.coeffs);
  OdeOptions o = opts;
  if (o.max_step <= 0.0) o.max_step = duration / 50;
  const bool zero = std::all_of(X.a.begin(), X.a.end(), [](const Expr& e) { return e.is_zero(); });
  seg.trajectory = zero ? FlowResult::constant(x0, 0.0, duration)
                        : integrate(X.a, F.chart.names(), x0, 0.0, duration, o, &F.chart.domain());
  LeafwisePath p(F, x0);
  p.segments_.push_back(std::move(seg));
  return p;
}

LeafwisePath constant_path(const Foliation& F, const Eigen::VectorXd& x0, double duration) {
  if (!(duration > 0.0)) throw InvalidArgument("constant_path: duration must be positive");
  if (x0.size() != F.chart.dim()) throw InvalidArgument("constant_path: wrong point dimension");
  PathSegment seg;
  seg.start = x0;
  seg.duration = duration;
  seg.margin = duration / 10;
  seg.coeffs.assign(F.size(), Expr(0.0));
  seg.trajectory = FlowResult::constant(x0, 0.0, duration);
  LeafwisePath p(F, x0);
  p.segments_.push_back(std::move(seg));
  return p;
}

LeafwisePath concatenate(const LeafwisePath& p1, const LeafwisePath& p2, double junction_tol) {
  if (!same_foliation(p1.foliation(), p2.foliation()))
    throw InvalidArgument("concatenate: paths belong to different foliations");
  const double gap = (p2.end() - p1.start()).lpNorm<Eigen::Infinity>();
  if (gap > junction_tol) {
    throw InvalidArgument("concatenate: end of the first-run path differs from the start of the "
                          "second by " + format_number(gap));
  }
  LeafwisePath p(p2.foliation(), p2.start());
  p.segments_ = p2.segments();
  p.segments_.insert(p.segments_.end(), p1.segments().begin(), p1.segments().end());
  return p;
}

LeafwisePath invert(const LeafwisePath& p) {
  LeafwisePath q(p.foliation(), p.end());
  const Expr t = Expr::variable(kTimeVar);
  for (auto it = p.segments().rbegin(); it != p.segments().rend(); ++it) {
    PathSegment s;
    s.duration = it->duration;
    s.margin = it->margin;
    s.start = it->trajectory.endpoint();
    for (const auto& c : it->coeffs) {
      s.coeffs.push_back(c.is_zero() ? Expr(0.0)
                                     : simplify(-substitute(c, {{kTimeVar, Expr(it->duration) - t}})));
    }
    s.trajectory = it->trajectory.reversed(it->duration);
    q.segments_.push_back(std::move(s));
  }
  return q;
}

double exposure(const PathSegment& segment, int generator) {
  const Expr& c = segment.coeffs.at(generator);
  if (!time_only(c)) throw InvalidArgument("exposure: coefficient depends on base coordinates");
  if (c.is_zero()) return 0.0;
  std::vector<std::string> slots{kTimeVar};
  const CompiledExpr f(c, slots);
  const OdeRhs rhs = [&](double t, const Eigen::VectorXd&, Eigen::VectorXd& dy) {
    const double v[1] = {t};
    dy[0] = f(v);
  };
  OdeOptions o;
  o.rtol = 1e-13;
  o.atol = 1e-14;
  o.max_step = segment.duration / 50;
  const FlowResult r = integrate_ode(rhs, Eigen::VectorXd::Zero(1), 0.0, segment.duration, o);
  if (!r.ok()) throw FlowError(r.diagnostics().status, r.diagnostics().t_stop, r.endpoint(),
                               "exposure: " + r.diagnostics().message);
  return r.endpoint()[0];
}

}  // namespace jetholo
