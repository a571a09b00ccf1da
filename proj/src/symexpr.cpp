#include "jetholo/symexpr.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <unordered_map>

#include "symexpr_node.hpp"

namespace jetholo {

using detail::Node;

Rational Rational::make(long long p, long long q) {
  if (q == 0) throw InvalidArgument("rational exponent with zero denominator");
  if (q < 0) {
    p = -p;
    q = -q;
  }
  const long long g = std::gcd(p < 0 ? -p : p, q);
  if (g > 1) {
    p /= g;
    q /= g;
  }
  if (p > 1'000'000 || p < -1'000'000 || q > 1'000'000)
    throw InvalidArgument("rational exponent out of range");
  return Rational{static_cast<int>(p), static_cast<int>(q)};
}

namespace {

constexpr std::uint64_t kHashMul = 0x9E3779B97F4A7C15ULL;

std::size_t mix(std::size_t h, std::size_t v) {
  return h ^ (v + kHashMul + (h << 6) + (h >> 2));
}

std::size_t hash_double(double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof bits);
  return std::hash<std::uint64_t>{}(bits);
}

std::uint64_t mask_bit(std::string_view name) {
  return std::uint64_t{1} << (std::hash<std::string_view>{}(name) % 64);
}

Expr finish(Node n) {
  std::size_t h = static_cast<std::size_t>(n.op) * 1315423911u;
  h = mix(h, hash_double(n.value));
  if (n.op == Op::Var) {
    h = mix(h, std::hash<std::string>{}(n.name));
    n.mask = mask_bit(n.name);
  }
  h = mix(h, static_cast<std::size_t>(n.fn));
  h = mix(h, static_cast<std::size_t>(n.exponent.num) * 31 + n.exponent.den);
  h = mix(h, hash_double(n.lo));
  h = mix(h, hash_double(n.hi));
  h = mix(h, static_cast<std::size_t>(n.order));
  std::size_t size = 1;
  for (const auto& a : n.args) {
    h = mix(h, a.hash());
    size += a.size();
    n.mask |= a.var_mask();
  }
  n.hash = h;
  n.size = size;
  return Expr(std::make_shared<const Node>(std::move(n)));
}

Expr make_const(double v) {
  Node n;
  n.op = Op::Const;
  n.value = (v == 0.0) ? 0.0 : v;  // collapse -0.0
  return finish(std::move(n));
}

Expr make_node(Op op, std::vector<Expr> args) {
  Node n;
  n.op = op;
  n.args = std::move(args);
  return finish(std::move(n));
}

const char* fn_name(Fn fn) {
  switch (fn) {
    case Fn::Sin: return "sin";
    case Fn::Cos: return "cos";
    case Fn::Exp: return "exp";
    case Fn::Log: return "log";
    case Fn::Tanh: return "tanh";
  }
  return "?";
}

// Status codes for the scalar kernels shared by eval() and CompiledExpr.
enum class Domain { Ok, DivZero, LogDomain, PowDomain, Overflow };

const char* domain_message(Domain d) {
  switch (d) {
    case Domain::DivZero: return "division by zero";
    case Domain::LogDomain: return "log of non-positive argument";
    case Domain::PowDomain: return "power outside its real domain";
    case Domain::Overflow: return "floating-point overflow";
    case Domain::Ok: break;
  }
  return "domain error";
}

Domain eval_pow(double base, Rational r, double& out) {
  if (base == 0.0 && r.num < 0) return Domain::DivZero;
  if (r.den == 1) {
    out = std::pow(base, static_cast<double>(r.num));
  } else if (base < 0.0) {
    if (r.den % 2 == 0) return Domain::PowDomain;
    const double mag = std::pow(-base, r.value());
    out = (r.num % 2 == 0) ? mag : -mag;
  } else {
    out = std::pow(base, r.value());
  }
  return std::isfinite(out) ? Domain::Ok : Domain::Overflow;
}

Domain eval_fn(Fn fn, double x, double& out) {
  switch (fn) {
    case Fn::Sin: out = std::sin(x); break;
    case Fn::Cos: out = std::cos(x); break;
    case Fn::Exp: out = std::exp(x); break;
    case Fn::Log:
      if (!(x > 0.0)) return Domain::LogDomain;
      out = std::log(x);
      break;
    case Fn::Tanh: out = std::tanh(x); break;
  }
  return std::isfinite(out) ? Domain::Ok : Domain::Overflow;
}

}  // namespace

// ---------------------------------------------------------------------------
// Cutoff primitive

double bump_value(double u, double lo, double hi, int order) {
  const double width = hi - lo;
  const double s = (u - lo) / width;
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return order == 0 ? 1.0 : 0.0;

  // Taylor coefficients in h of g(s + h) and g(1 - s - h), g(r) = exp(-1/r), up to `order`,
  // then the series quotient G1 / (G1 + G2).
  const int m = order;
  std::vector<double> g1(m + 1, 0.0), g2(m + 1, 0.0), p(m + 1), q(m + 1);
  auto exp_series = [m](const std::vector<double>& in, std::vector<double>& out) {
    out[0] = std::exp(in[0]);
    if (out[0] == 0.0) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    for (int n = 1; n <= m; ++n) {
      double acc = 0.0;
      for (int j = 1; j <= n; ++j) acc += j * in[j] * out[n - j];
      out[n] = acc / n;
    }
  };
  // -1/(s+h) = -sum (-1)^j h^j / s^(j+1)
  double inv = 1.0 / s;
  double pw = inv;
  for (int j = 0; j <= m; ++j) {
    p[j] = -((j % 2 == 0) ? pw : -pw);
    pw *= inv;
  }
  // -1/(1-s-h) = -sum h^j / (1-s)^(j+1)
  const double r = 1.0 - s;
  const double invr = 1.0 / r;
  pw = invr;
  for (int j = 0; j <= m; ++j) {
    q[j] = -pw;
    pw *= invr;
  }
  if (-inv > -745.0) exp_series(p, g1);
  if (-invr > -745.0) exp_series(q, g2);

  std::vector<double> den(m + 1), quo(m + 1);
  for (int j = 0; j <= m; ++j) den[j] = g1[j] + g2[j];
  for (int n = 0; n <= m; ++n) {
    double acc = g1[n];
    for (int j = 1; j <= n; ++j) acc -= den[j] * quo[n - j];
    quo[n] = acc / den[0];
  }
  double factorial = 1.0;
  for (int j = 2; j <= m; ++j) factorial *= j;
  return factorial * quo[m] / std::pow(width, m);
}

// ---------------------------------------------------------------------------
// Expr accessors

Expr::Expr() {
  static const Expr zero = make_const(0.0);
  node_ = zero.node_;
}

Expr::Expr(double value) : node_(make_const(value).node_) {}

Expr Expr::variable(std::string name) {
  Node n;
  n.op = Op::Var;
  n.name = std::move(name);
  return finish(std::move(n));
}

Op Expr::op() const { return node_->op; }
double Expr::value() const { return node_->value; }
const std::string& Expr::name() const { return node_->name; }
Fn Expr::fn() const { return node_->fn; }
Rational Expr::exponent() const { return node_->exponent; }
double Expr::bump_lo() const { return node_->lo; }
double Expr::bump_hi() const { return node_->hi; }
int Expr::bump_order() const { return node_->order; }
std::span<const Expr> Expr::args() const { return node_->args; }
std::size_t Expr::size() const { return node_->size; }
std::size_t Expr::hash() const { return node_->hash; }
std::uint64_t Expr::var_mask() const { return node_->mask; }
std::string Expr::str() const { return to_string(*this); }

bool operator==(const Expr& a, const Expr& b) {
  const Node& x = a.node();
  const Node& y = b.node();
  if (&x == &y) return true;
  if (x.hash != y.hash || x.op != y.op || x.size != y.size) return false;
  switch (x.op) {
    case Op::Const: return x.value == y.value;
    case Op::Var: return x.name == y.name;
    case Op::Pow:
      if (!(x.exponent == y.exponent)) return false;
      break;
    case Op::Func:
      if (x.fn != y.fn) return false;
      break;
    case Op::Bump:
      if (x.lo != y.lo || x.hi != y.hi || x.order != y.order) return false;
      break;
    default: break;
  }
  if (x.args.size() != y.args.size()) return false;
  for (std::size_t i = 0; i < x.args.size(); ++i)
    if (!(x.args[i] == y.args[i])) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Smart constructors

namespace {

void flatten_sum(const Expr& t, std::vector<Expr>& out, double& c) {
  if (t.op() == Op::Sum) {
    for (const auto& a : t.args()) flatten_sum(a, out, c);
  } else if (t.is_constant()) {
    c += t.value();
  } else {
    out.push_back(t);
  }
}

void flatten_product(const Expr& f, std::vector<Expr>& out, double& c) {
  if (f.op() == Op::Product) {
    for (const auto& a : f.args()) flatten_product(a, out, c);
  } else if (f.op() == Op::Neg) {
    c = -c;
    flatten_product(f.args()[0], out, c);
  } else if (f.is_constant()) {
    c *= f.value();
  } else {
    out.push_back(f);
  }
}

}  // namespace

Expr sum(std::vector<Expr> terms) {
  std::vector<Expr> flat;
  flat.reserve(terms.size());
  double c = 0.0;
  for (const auto& t : terms) flatten_sum(t, flat, c);
  if (c != 0.0) flat.push_back(make_const(c));
  if (flat.empty()) return Expr();
  if (flat.size() == 1) return flat.front();
  return make_node(Op::Sum, std::move(flat));
}

Expr product(std::vector<Expr> factors) {
  std::vector<Expr> flat;
  flat.reserve(factors.size());
  double c = 1.0;
  for (const auto& f : factors) flatten_product(f, flat, c);
  if (c == 0.0) return Expr();
  if (flat.empty()) return make_const(c);
  if (c == 1.0) return flat.size() == 1 ? flat.front() : make_node(Op::Product, std::move(flat));
  if (c == -1.0) {
    Expr core = flat.size() == 1 ? flat.front() : make_node(Op::Product, std::move(flat));
    return make_node(Op::Neg, {core});
  }
  flat.insert(flat.begin(), make_const(c));
  return make_node(Op::Product, std::move(flat));
}

Expr operator+(const Expr& a, const Expr& b) { return sum({a, b}); }
Expr operator-(const Expr& a, const Expr& b) { return sum({a, -b}); }
Expr operator*(const Expr& a, const Expr& b) { return product({a, b}); }

Expr operator-(const Expr& a) {
  switch (a.op()) {
    case Op::Const: return make_const(-a.value());
    case Op::Neg: return a.args()[0];
    case Op::Product:
      if (a.args()[0].is_constant()) return product({make_const(-1.0), a});
      break;
    case Op::Quot:
      if (a.args()[0].is_constant()) return make_node(Op::Quot, {make_const(-a.args()[0].value()), a.args()[1]});
      break;
    default: break;
  }
  return make_node(Op::Neg, {a});
}

Expr operator/(const Expr& a, const Expr& b) {
  if (b.is_constant()) {
    if (b.value() == 1.0) return a;
    if (b.value() == -1.0) return -a;
    if (a.is_constant() && b.value() != 0.0) return make_const(a.value() / b.value());
  }
  if (a.is_zero() && !b.is_zero()) return Expr();
  return make_node(Op::Quot, {a, b});
}

Expr pow(const Expr& base, Rational r) {
  if (r.num == 0) return make_const(1.0);
  if (r.num == 1 && r.den == 1) return base;
  if (base.is_constant()) {
    double out = 0.0;
    if (eval_pow(base.value(), r, out) == Domain::Ok) return make_const(out);
  }
  if (base.op() == Op::Pow && r.is_integer() && base.exponent().is_integer())
    return pow(base.args()[0], Rational::make(static_cast<long long>(r.num) * base.exponent().num, 1));
  Node n;
  n.op = Op::Pow;
  n.exponent = r;
  n.args = {base};
  return finish(std::move(n));
}

Expr pow(const Expr& base, int exponent) { return pow(base, Rational{exponent, 1}); }

Expr apply(Fn fn, const Expr& arg) {
  if (arg.is_constant()) {
    double out = 0.0;
    if (eval_fn(fn, arg.value(), out) == Domain::Ok) return make_const(out);
  }
  Node n;
  n.op = Op::Func;
  n.fn = fn;
  n.args = {arg};
  return finish(std::move(n));
}

Expr sin(const Expr& e) { return apply(Fn::Sin, e); }
Expr cos(const Expr& e) { return apply(Fn::Cos, e); }
Expr exp(const Expr& e) { return apply(Fn::Exp, e); }
Expr log(const Expr& e) { return apply(Fn::Log, e); }
Expr tanh(const Expr& e) { return apply(Fn::Tanh, e); }

Expr bump(const Expr& arg, double lo, double hi, int order) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw InvalidArgument("bump requires finite lo < hi");
  if (order < 0) throw InvalidArgument("bump derivative order must be non-negative");
  if (arg.is_constant()) return make_const(bump_value(arg.value(), lo, hi, order));
  Node n;
  n.op = Op::Bump;
  n.lo = lo == 0.0 ? 0.0 : lo;
  n.hi = hi == 0.0 ? 0.0 : hi;
  n.order = order;
  n.args = {arg};
  return finish(std::move(n));
}

// ---------------------------------------------------------------------------
// Differentiation

namespace {

class Differentiator {
 public:
  explicit Differentiator(std::string_view var) : var_(var), bit_(mask_bit(var)) {}

  Expr operator()(const Expr& e) {
    if ((e.var_mask() & bit_) == 0) return Expr();
    const Node* key = &e.node();
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    Expr d = compute(e);
    memo_.emplace(key, d);
    return d;
  }

 private:
  Expr compute(const Expr& e) {
    switch (e.op()) {
      case Op::Const: return Expr();
      case Op::Var: return e.name() == var_ ? Expr(1.0) : Expr();
      case Op::Sum: {
        std::vector<Expr> terms;
        for (const auto& a : e.args()) terms.push_back((*this)(a));
        return sum(std::move(terms));
      }
      case Op::Product: {
        const auto args = e.args();
        std::vector<Expr> terms;
        for (std::size_t i = 0; i < args.size(); ++i) {
          Expr di = (*this)(args[i]);
          if (di.is_zero()) continue;
          std::vector<Expr> fs;
          for (std::size_t j = 0; j < args.size(); ++j) fs.push_back(j == i ? di : args[j]);
          terms.push_back(product(std::move(fs)));
        }
        return sum(std::move(terms));
      }
      case Op::Neg: return -(*this)(e.args()[0]);
      case Op::Quot: {
        const Expr& n = e.args()[0];
        const Expr& d = e.args()[1];
        Expr dn = (*this)(n);
        Expr dd = (*this)(d);
        if (dd.is_zero()) return dn / d;
        return (dn * d - n * dd) / pow(d, 2);
      }
      case Op::Pow: {
        const Expr& b = e.args()[0];
        const Rational r = e.exponent();
        Expr db = (*this)(b);
        const Rational lowered = Rational::make(static_cast<long long>(r.num) - r.den, r.den);
        Expr coeff = r.is_integer() ? Expr(static_cast<double>(r.num))
                                    : Expr(static_cast<double>(r.num)) / Expr(static_cast<double>(r.den));
        return product({coeff, pow(b, lowered), db});
      }
      case Op::Func: {
        const Expr& u = e.args()[0];
        Expr du = (*this)(u);
        switch (e.fn()) {
          case Fn::Sin: return cos(u) * du;
          case Fn::Cos: return -(sin(u) * du);
          case Fn::Exp: return e * du;
          case Fn::Log: return du / u;
          case Fn::Tanh: return (Expr(1.0) - pow(e, 2)) * du;
        }
        break;
      }
      case Op::Bump: {
        const Expr& u = e.args()[0];
        return bump(u, e.bump_lo(), e.bump_hi(), e.bump_order() + 1) * (*this)(u);
      }
    }
    return Expr();
  }

  std::string_view var_;
  std::uint64_t bit_;
  std::unordered_map<const Node*, Expr> memo_;
};

}  // namespace

Expr diff(const Expr& e, std::string_view var) {
  Differentiator d(var);
  return simplify(d(e));
}

// ---------------------------------------------------------------------------
// Simplification

namespace {

struct ExprHash {
  std::size_t operator()(const Expr& e) const { return e.hash(); }
};

int op_rank(Op op) {
  switch (op) {
    case Op::Const: return 0;
    case Op::Var: return 1;
    case Op::Pow: return 2;
    case Op::Product: return 3;
    case Op::Func: return 4;
    case Op::Bump: return 5;
    case Op::Quot: return 6;
    case Op::Sum: return 7;
    case Op::Neg: return 8;
  }
  return 9;
}

template <typename T>
int three_way(const T& a, const T& b) {
  return a < b ? -1 : (b < a ? 1 : 0);
}

// Deterministic structural order used to arrange sum terms and product factors. A power is
// ordered by its base first so that x^2 sorts next to x.
int structural_compare(const Expr& a, const Expr& b) {
  if (&a.node() == &b.node()) return 0;
  const bool ap = a.op() == Op::Pow, bp = b.op() == Op::Pow;
  if (ap || bp) {
    const Expr& ba = ap ? a.args()[0] : a;
    const Expr& bb = bp ? b.args()[0] : b;
    if (int c = structural_compare(ba, bb); c != 0) return c;
    const double ea = ap ? a.exponent().value() : 1.0;
    const double eb = bp ? b.exponent().value() : 1.0;
    return three_way(ea, eb);
  }
  if (int c = three_way(op_rank(a.op()), op_rank(b.op())); c != 0) return c;
  switch (a.op()) {
    case Op::Const: return three_way(a.value(), b.value());
    case Op::Var: return a.name().compare(b.name()) < 0 ? -1 : (a.name() == b.name() ? 0 : 1);
    case Op::Func:
      if (int c = three_way(static_cast<int>(a.fn()), static_cast<int>(b.fn())); c != 0) return c;
      break;
    case Op::Bump:
      if (int c = three_way(a.bump_lo(), b.bump_lo()); c != 0) return c;
      if (int c = three_way(a.bump_hi(), b.bump_hi()); c != 0) return c;
      if (int c = three_way(a.bump_order(), b.bump_order()); c != 0) return c;
      break;
    default: break;
  }
  const auto x = a.args(), y = b.args();
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i)
    if (int c = structural_compare(x[i], y[i]); c != 0) return c;
  return three_way(x.size(), y.size());
}

bool structural_less(const Expr& a, const Expr& b) { return structural_compare(a, b) < 0; }

class Simplifier {
 public:
  Expr operator()(const Expr& e) {
    if (e.op() == Op::Const || e.op() == Op::Var) return e;
    const Node* key = &e.node();
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    Expr s = compute(e);
    memo_.emplace(key, s);
    return s;
  }

 private:
  // term = coef * core; core is empty for pure constants
  static void decompose(const Expr& t, double& coef, std::optional<Expr>& core) {
    if (t.is_constant()) {
      coef = t.value();
      core.reset();
      return;
    }
    if (t.op() == Op::Neg) {
      decompose(t.args()[0], coef, core);
      coef = -coef;
      return;
    }
    if (t.op() == Op::Product && t.args()[0].is_constant()) {
      coef = t.args()[0].value();
      std::vector<Expr> rest(t.args().begin() + 1, t.args().end());
      core = rest.size() == 1 ? rest.front() : make_node(Op::Product, std::move(rest));
      return;
    }
    coef = 1.0;
    core = t;
  }

  void expand_terms(const Expr& t, bool negate, std::vector<Expr>& out) {
    if (t.op() == Op::Sum) {
      for (const auto& a : t.args()) expand_terms(a, negate, out);
    } else if (t.op() == Op::Neg && t.args()[0].op() == Op::Sum) {
      expand_terms(t.args()[0], !negate, out);
    } else {
      out.push_back(negate ? -t : t);
    }
  }

  Expr collect_sum(std::vector<Expr> raw) {
    std::vector<Expr> terms;
    for (const auto& t : raw) expand_terms(t, false, terms);
    std::vector<Expr> cores;
    std::vector<double> coefs;
    std::unordered_map<Expr, std::size_t, ExprHash> index;
    double constant = 0.0;
    for (const auto& t : terms) {
      double c = 1.0;
      std::optional<Expr> core;
      decompose(t, c, core);
      if (!core) {
        constant += c;
        continue;
      }
      auto [it, inserted] = index.emplace(*core, cores.size());
      if (inserted) {
        cores.push_back(*core);
        coefs.push_back(c);
      } else {
        coefs[it->second] += c;
      }
    }
    std::vector<std::size_t> perm(cores.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::stable_sort(perm.begin(), perm.end(),
                     [&](std::size_t i, std::size_t j) { return structural_less(cores[i], cores[j]); });
    std::vector<Expr> out;
    for (std::size_t i : perm) {
      if (coefs[i] == 0.0) continue;
      out.push_back(product({Expr(coefs[i]), cores[i]}));
    }
    if (constant != 0.0) out.push_back(Expr(constant));
    return sum(std::move(out));
  }

  Expr collect_product(std::vector<Expr> raw) {
    std::vector<Expr> flat;
    double c = 1.0;
    for (const auto& f : raw) flatten_product(f, flat, c);
    if (c == 0.0) return Expr();
    std::vector<Expr> bases;
    std::vector<long long> powers;
    std::vector<Expr> others;
    std::unordered_map<Expr, std::size_t, ExprHash> index;
    std::vector<std::size_t> order;  // position tags: base slot or other slot
    std::vector<bool> is_base;
    for (const auto& f : flat) {
      Expr base = f;
      long long n = 1;
      if (f.op() == Op::Pow && f.exponent().is_integer() && f.exponent().num > 0) {
        base = f.args()[0];
        n = f.exponent().num;
      } else if (f.op() == Op::Pow || f.op() == Op::Quot) {
        order.push_back(others.size());
        is_base.push_back(false);
        others.push_back(f);
        continue;
      }
      auto [it, inserted] = index.emplace(base, bases.size());
      if (inserted) {
        order.push_back(bases.size());
        is_base.push_back(true);
        bases.push_back(base);
        powers.push_back(n);
      } else {
        powers[it->second] += n;
      }
    }
    std::vector<Expr> factors;
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (is_base[i]) {
        const std::size_t b = order[i];
        factors.push_back(powers[b] == 1 ? bases[b] : pow(bases[b], Rational::make(powers[b], 1)));
      } else {
        factors.push_back(others[order[i]]);
      }
    }
    std::stable_sort(factors.begin(), factors.end(), structural_less);
    std::vector<Expr> out{Expr(c)};
    out.insert(out.end(), factors.begin(), factors.end());
    return product(std::move(out));
  }

  Expr compute(const Expr& e) {
    std::vector<Expr> args;
    args.reserve(e.args().size());
    for (const auto& a : e.args()) args.push_back((*this)(a));
    switch (e.op()) {
      case Op::Sum: return collect_sum(std::move(args));
      case Op::Product: return collect_product(std::move(args));
      case Op::Neg:
        if (args[0].op() == Op::Sum) return collect_sum({make_node(Op::Neg, {args[0]})});
        return -args[0];
      case Op::Quot: return args[0] / args[1];
      case Op::Pow: return pow(args[0], e.exponent());
      case Op::Func: return apply(e.fn(), args[0]);
      case Op::Bump: return bump(args[0], e.bump_lo(), e.bump_hi(), e.bump_order());
      default: return e;
    }
  }

  std::unordered_map<const Node*, Expr> memo_;
};

}  // namespace

Expr simplify(const Expr& e) {
  Simplifier s;
  return s(e);
}

// ---------------------------------------------------------------------------
// Substitution and variable queries

Expr substitute(const Expr& e, const std::map<std::string, Expr, std::less<>>& repl) {
  std::uint64_t mask = 0;
  for (const auto& [name, _] : repl) mask |= mask_bit(name);
  std::unordered_map<const Node*, Expr> memo;
  std::function<Expr(const Expr&)> go = [&](const Expr& x) -> Expr {
    if ((x.var_mask() & mask) == 0) return x;
    if (x.op() == Op::Var) {
      auto it = repl.find(x.name());
      return it == repl.end() ? x : it->second;
    }
    if (auto it = memo.find(&x.node()); it != memo.end()) return it->second;
    std::vector<Expr> args;
    for (const auto& a : x.args()) args.push_back(go(a));
    Expr out;
    switch (x.op()) {
      case Op::Sum: out = sum(std::move(args)); break;
      case Op::Product: out = product(std::move(args)); break;
      case Op::Neg: out = -args[0]; break;
      case Op::Quot: out = args[0] / args[1]; break;
      case Op::Pow: out = pow(args[0], x.exponent()); break;
      case Op::Func: out = apply(x.fn(), args[0]); break;
      case Op::Bump: out = bump(args[0], x.bump_lo(), x.bump_hi(), x.bump_order()); break;
      default: out = x; break;
    }
    memo.emplace(&x.node(), out);
    return out;
  };
  return go(e);
}

std::vector<std::string> free_variables(const Expr& e) {
  std::set<std::string> names;
  std::function<void(const Expr&)> go = [&](const Expr& x) {
    if (x.var_mask() == 0) return;
    if (x.op() == Op::Var) {
      names.insert(x.name());
      return;
    }
    for (const auto& a : x.args()) go(a);
  };
  go(e);
  return {names.begin(), names.end()};
}

bool depends_on(const Expr& e, std::string_view var) {
  if ((e.var_mask() & mask_bit(var)) == 0) return false;
  if (e.op() == Op::Var) return e.name() == var;
  for (const auto& a : e.args())
    if (depends_on(a, var)) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

double eval_node(const Expr& e, const VarEnv& env) {
  auto check = [&e](Domain d) {
    if (d != Domain::Ok) throw EvalError(domain_message(d), to_string(e));
  };
  switch (e.op()) {
    case Op::Const: return e.value();
    case Op::Var: {
      auto it = env.find(e.name());
      if (it == env.end()) throw UnboundVariableError(e.name());
      return it->second;
    }
    case Op::Sum: {
      double acc = 0.0;
      for (const auto& a : e.args()) acc += eval_node(a, env);
      return acc;
    }
    case Op::Product: {
      double acc = 1.0;
      for (const auto& a : e.args()) acc *= eval_node(a, env);
      return acc;
    }
    case Op::Neg: return -eval_node(e.args()[0], env);
    case Op::Quot: {
      const double n = eval_node(e.args()[0], env);
      const double d = eval_node(e.args()[1], env);
      if (d == 0.0) check(Domain::DivZero);
      return n / d;
    }
    case Op::Pow: {
      double out = 0.0;
      check(eval_pow(eval_node(e.args()[0], env), e.exponent(), out));
      return out;
    }
    case Op::Func: {
      double out = 0.0;
      check(eval_fn(e.fn(), eval_node(e.args()[0], env), out));
      return out;
    }
    case Op::Bump:
      return bump_value(eval_node(e.args()[0], env), e.bump_lo(), e.bump_hi(), e.bump_order());
  }
  return 0.0;
}

}  // namespace

double eval(const Expr& e, const VarEnv& env) { return eval_node(e, env); }

// ---------------------------------------------------------------------------
// Printing

std::string format_number(double v) {
  if (v == 0.0) return "0";
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) return std::to_string(v);
  return std::string(buf.data(), ptr);
}

namespace {

// precedence: Sum 1, unary minus 2, Product/Quot 3, Pow 4, atom 5
int precedence(const Expr& e) {
  switch (e.op()) {
    case Op::Const: return e.value() < 0.0 ? 2 : 5;
    case Op::Sum: return 1;
    case Op::Neg: return 2;
    case Op::Product:
    case Op::Quot: return 3;
    case Op::Pow: return 4;
    default: return 5;
  }
}

void print(const Expr& e, std::string& out);

// Operand printed right after a minus sign; "--" would not read back, so such operands get
// parentheses.
void print_negated(const Expr& e, std::string& out) {
  std::string tmp;
  if (precedence(e) < 3) {
    tmp += '(';
    print(e, tmp);
    tmp += ')';
  } else {
    print(e, tmp);
  }
  if (!tmp.empty() && tmp[0] == '-') {
    out += '(';
    out += tmp;
    out += ')';
  } else {
    out += tmp;
  }
}

void print_at(const Expr& e, int min_prec, std::string& out) {
  if (precedence(e) < min_prec) {
    out += '(';
    print(e, out);
    out += ')';
  } else {
    print(e, out);
  }
}

void print(const Expr& e, std::string& out) {
  switch (e.op()) {
    case Op::Const: out += format_number(e.value()); return;
    case Op::Var: out += e.name(); return;
    case Op::Sum: {
      const auto args = e.args();
      print_at(args[0], 2, out);
      for (std::size_t i = 1; i < args.size(); ++i) {
        const Expr& t = args[i];
        if (t.op() == Op::Neg) {
          out += " - ";
          print_negated(t.args()[0], out);
        } else if (t.is_constant() && t.value() < 0.0) {
          out += " - ";
          out += format_number(-t.value());
        } else if (t.op() == Op::Product && t.args()[0].is_constant() && t.args()[0].value() < 0.0) {
          std::vector<Expr> fs(t.args().begin(), t.args().end());
          fs[0] = Expr(-fs[0].value());
          out += " - ";
          print_negated(product(std::move(fs)), out);
        } else {
          out += " + ";
          print_at(t, 2, out);
        }
      }
      return;
    }
    case Op::Neg:
      out += '-';
      print_negated(e.args()[0], out);
      return;
    case Op::Product: {
      const auto args = e.args();
      for (std::size_t i = 0; i < args.size(); ++i) {
        if (i == 0) {
          if (args[0].op() == Op::Product) print_at(args[0], 4, out);
          else print_at(args[0], 2, out);
        } else {
          out += '*';
          print_at(args[i], 4, out);
        }
      }
      return;
    }
    case Op::Quot:
      print_at(e.args()[0], 2, out);
      out += '/';
      print_at(e.args()[1], 4, out);
      return;
    case Op::Pow: {
      print_at(e.args()[0], 5, out);
      const Rational r = e.exponent();
      out += '^';
      if (r.den == 1 && r.num >= 0) {
        out += std::to_string(r.num);
      } else {
        out += '(';
        out += std::to_string(r.num);
        if (r.den != 1) {
          out += '/';
          out += std::to_string(r.den);
        }
        out += ')';
      }
      return;
    }
    case Op::Func:
      out += fn_name(e.fn());
      out += '(';
      print(e.args()[0], out);
      out += ')';
      return;
    case Op::Bump:
      out += "bump(";
      print(e.args()[0], out);
      out += ';';
      out += format_number(e.bump_lo());
      out += ',';
      out += format_number(e.bump_hi());
      if (e.bump_order() > 0) {
        out += ';';
        out += std::to_string(e.bump_order());
      }
      out += ')';
      return;
  }
}

}  // namespace

std::string to_string(const Expr& e) {
  std::string out;
  print(e, out);
  return out;
}

// ---------------------------------------------------------------------------
// Compiled evaluation

CompiledExpr::CompiledExpr(const Expr& e, std::span<const std::string> slots) {
  emit(e, slots, 0);
}

void CompiledExpr::emit(const Expr& e, std::span<const std::string> slots, int depth) {
  Instr ins{e.op()};
  switch (e.op()) {
    case Op::Const: ins.c0 = e.value(); break;
    case Op::Var: {
      auto it = std::find(slots.begin(), slots.end(), e.name());
      if (it == slots.end()) throw UnboundVariableError(e.name());
      ins.arg = static_cast<std::uint32_t>(it - slots.begin());
      break;
    }
    default: {
      int d = depth;
      for (const auto& a : e.args()) emit(a, slots, d++);
      ins.arg = static_cast<std::uint32_t>(e.args().size());
      ins.c0 = e.bump_lo();
      ins.c1 = e.bump_hi();
      ins.i0 = e.op() == Op::Pow ? e.exponent().num : e.bump_order();
      ins.i1 = e.exponent().den;
      if (e.op() == Op::Func) ins.arg = static_cast<std::uint32_t>(e.fn());
      break;
    }
  }
  ins.node = static_cast<std::uint32_t>(nodes_.size());
  if (e.op() == Op::Quot || e.op() == Op::Pow || e.op() == Op::Func) nodes_.push_back(e);
  code_.push_back(ins);
  max_depth_ = std::max(max_depth_, depth + 1);
}

void CompiledExpr::fail(const Instr& ins, const char* what) const {
  throw EvalError(what, to_string(nodes_.at(ins.node)));
}

double CompiledExpr::operator()(std::span<const double> values) const {
  std::array<double, 128> small{};
  std::vector<double> big;
  double* stack = small.data();
  if (max_depth_ > static_cast<int>(small.size())) {
    big.resize(max_depth_);
    stack = big.data();
  }
  int sp = 0;
  for (const Instr& ins : code_) {
    switch (ins.op) {
      case Op::Const: stack[sp++] = ins.c0; break;
      case Op::Var: stack[sp++] = values[ins.arg]; break;
      case Op::Sum: {
        double acc = 0.0;
        for (std::uint32_t i = 0; i < ins.arg; ++i) acc += stack[sp - ins.arg + i];
        sp -= ins.arg;
        stack[sp++] = acc;
        break;
      }
      case Op::Product: {
        double acc = 1.0;
        for (std::uint32_t i = 0; i < ins.arg; ++i) acc *= stack[sp - ins.arg + i];
        sp -= ins.arg;
        stack[sp++] = acc;
        break;
      }
      case Op::Neg: stack[sp - 1] = -stack[sp - 1]; break;
      case Op::Quot: {
        const double d = stack[--sp];
        if (d == 0.0) fail(ins, domain_message(Domain::DivZero));
        stack[sp - 1] /= d;
        break;
      }
      case Op::Pow: {
        double out = 0.0;
        const Domain st = eval_pow(stack[sp - 1], Rational{ins.i0, ins.i1}, out);
        if (st != Domain::Ok) fail(ins, domain_message(st));
        stack[sp - 1] = out;
        break;
      }
      case Op::Func: {
        double out = 0.0;
        const Domain st = eval_fn(static_cast<Fn>(ins.arg), stack[sp - 1], out);
        if (st != Domain::Ok) fail(ins, domain_message(st));
        stack[sp - 1] = out;
        break;
      }
      case Op::Bump: stack[sp - 1] = bump_value(stack[sp - 1], ins.c0, ins.c1, ins.i0); break;
    }
  }
  return stack[0];
}

}  // namespace jetholo
