#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jetholo/errors.hpp"

namespace jetholo {

/// Variable bindings used by eval().
using VarEnv = std::map<std::string, double, std::less<>>;

enum class Op : std::uint8_t { Const, Var, Sum, Product, Neg, Quot, Pow, Func, Bump };
enum class Fn : std::uint8_t { Sin, Cos, Exp, Log, Tanh };

/// Exponent p/q of a power node, kept reduced with q > 0.
struct Rational {
  int num = 0;
  int den = 1;

  static Rational make(long long p, long long q);
  double value() const { return static_cast<double>(num) / den; }
  bool is_integer() const { return den == 1; }
  friend bool operator==(const Rational&, const Rational&) = default;
};

namespace detail {
struct Node;
}

/// Immutable symbolic scalar expression.
///
/// Nodes are shared; copying an Expr is a pointer copy. Arithmetic operators perform only light
/// structural simplification (constant folding, 0/1 identities, flattening); call simplify() for
/// like-term collection.
class Expr {
 public:
  Expr();  // the constant 0
  Expr(double value);  // NOLINT(google-explicit-constructor): numeric literals mix freely

  static Expr variable(std::string name);

  Op op() const;
  /// Constant value; only meaningful for Op::Const.
  double value() const;
  /// Variable name; only meaningful for Op::Var.
  const std::string& name() const;
  Fn fn() const;
  Rational exponent() const;
  double bump_lo() const;
  double bump_hi() const;
  int bump_order() const;
  std::span<const Expr> args() const;

  bool is_constant() const { return op() == Op::Const; }
  bool is_zero() const { return is_constant() && value() == 0.0; }
  bool is_one() const { return is_constant() && value() == 1.0; }

  /// Number of nodes in the tree (shared subtrees counted once per reference).
  std::size_t size() const;
  std::size_t hash() const;
  /// Cheap over-approximation of the variable set: bit (hash(name) % 64) for each variable.
  std::uint64_t var_mask() const;

  std::string str() const;

  friend bool operator==(const Expr& a, const Expr& b);

  explicit Expr(std::shared_ptr<const detail::Node> node) : node_(std::move(node)) {}
  const detail::Node& node() const { return *node_; }

 private:
  std::shared_ptr<const detail::Node> node_;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);

Expr sum(std::vector<Expr> terms);
Expr product(std::vector<Expr> factors);
Expr pow(const Expr& base, Rational exponent);
Expr pow(const Expr& base, int exponent);
Expr apply(Fn fn, const Expr& arg);
Expr sin(const Expr& e);
Expr cos(const Expr& e);
Expr exp(const Expr& e);
Expr log(const Expr& e);
Expr tanh(const Expr& e);

/// Smooth cutoff: identically 0 for arg <= lo, identically 1 for arg >= hi, C-infinity in between
/// (built from the exp(-1/s) gluing). `order` > 0 denotes the order-th derivative in the argument,
/// which vanishes identically outside (lo, hi).
Expr bump(const Expr& arg, double lo, double hi, int order = 0);

/// Scalar evaluation of the cutoff primitive or one of its derivatives.
double bump_value(double u, double lo, double hi, int order);

/// Exact symbolic partial derivative.
Expr diff(const Expr& e, std::string_view var);

/// Conservative simplification: constant folding, 0/1 identities, flattening, like-term
/// collection in sums and equal-factor collection in products.
Expr simplify(const Expr& e);

/// Replace variables by expressions (simultaneously).
Expr substitute(const Expr& e, const std::map<std::string, Expr, std::less<>>& repl);

std::vector<std::string> free_variables(const Expr& e);
bool depends_on(const Expr& e, std::string_view var);

/// Throws UnboundVariableError for unbound names, EvalError for domain violations.
double eval(const Expr& e, const VarEnv& env);

/// Canonical text form; parse_expr(to_string(e)) prints back to the same text.
std::string to_string(const Expr& e);
std::string format_number(double v);

/// Parses the expression grammar (see docs/expression_grammar.md).
/// Throws ParseError for syntax errors and UnboundVariableError for unknown identifiers.
Expr parse_expr(std::string_view text, std::span<const std::string> allowed_vars);

/// Expression compiled to a postfix program over a fixed slot layout; eval is allocation-free for
/// typical depths and safe to call concurrently.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  CompiledExpr(const Expr& e, std::span<const std::string> slots);

  double operator()(std::span<const double> values) const;

 private:
  struct Instr {
    Op op;
    std::uint32_t arg = 0;  // slot index, arity, or function id
    double c0 = 0.0;
    double c1 = 0.0;
    int i0 = 0;
    int i1 = 0;
    std::uint32_t node = 0;  // index into nodes_ for error messages
  };
  void emit(const Expr& e, std::span<const std::string> slots, int depth);
  [[noreturn]] void fail(const Instr& ins, const char* what) const;

  std::vector<Instr> code_;
  std::vector<Expr> nodes_;
  int max_depth_ = 0;
};

}  // namespace jetholo
