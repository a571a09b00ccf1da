// Recursive-descent parser for the expression grammar in docs/expression_grammar.md.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "jetholo/symexpr.hpp"

namespace jetholo {
namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class ExprParser {
 public:
  ExprParser(std::string_view text, std::span<const std::string> vars) : text_(text), vars_(vars) {}

  Expr parse() {
    Expr e = expression();
    skip_space();
    if (pos_ < text_.size()) error(std::string("unexpected '") + text_[pos_] + "'");
    return e;
  }

 private:
  SourcePos where(std::size_t offset) const {
    SourcePos p;
    p.offset = offset;
    for (std::size_t i = 0; i < offset && i < text_.size(); ++i) {
      if (text_[i] == '\n') {
        ++p.line;
        p.column = 1;
      } else {
        ++p.column;
      }
    }
    return p;
  }

  [[noreturn]] void error(const std::string& msg) const { throw ParseError(msg, where(pos_)); }
  [[noreturn]] void error_at(const std::string& msg, std::size_t at) const {
    throw ParseError(msg, where(at));
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= text_.size()) error(std::string("expected '") + c + "' but reached end of input");
      error(std::string("expected '") + c + "' but found '" + text_[pos_] + "'");
    }
  }

  char peek() {
    skip_space();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  Expr expression() {
    std::vector<Expr> terms{term()};
    for (;;) {
      if (accept('+')) {
        terms.push_back(term());
      } else if (accept('-')) {
        terms.push_back(-term());
      } else {
        break;
      }
    }
    return terms.size() == 1 ? terms.front() : sum(std::move(terms));
  }

  Expr term() {
    std::vector<Expr> chain{unary()};
    for (;;) {
      if (accept('*')) {
        chain.push_back(unary());
      } else if (accept('/')) {
        Expr lhs = chain.size() == 1 ? chain.front() : product(std::move(chain));
        chain = {lhs / unary()};
      } else {
        break;
      }
    }
    return chain.size() == 1 ? chain.front() : product(std::move(chain));
  }

  Expr unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (accept('^')) return pow(base, exponent());
    return base;
  }

  // ['-'] NUMBER | '(' ['-'] NUMBER ['/' NUMBER] ')'
  Rational exponent() {
    bool negative = accept('-');
    Rational r;
    if (accept('(')) {
      if (accept('-')) negative = !negative;
      r = rational_literal();
      if (accept('/')) {
        const Rational d = rational_literal();
        if (d.num == 0) error("zero denominator in exponent");
        r = Rational::make(static_cast<long long>(r.num) * d.den, static_cast<long long>(r.den) * d.num);
      }
      expect(')');
    } else {
      r = rational_literal();
    }
    if (negative) r.num = -r.num;
    return r;
  }

  Rational rational_literal() {
    skip_space();
    const std::size_t start = pos_;
    long long whole = 0;
    long long den = 1;
    bool any = false;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      whole = whole * 10 + (text_[pos_++] - '0');
      any = true;
      if (whole > 1'000'000'000LL) error_at("exponent literal too large", start);
    }
    if (pos_ + 1 < text_.size() && text_[pos_] == '.' &&
        std::isdigit(static_cast<unsigned char>(text_[pos_ + 1]))) {
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        whole = whole * 10 + (text_[pos_++] - '0');
        den *= 10;
        if (den > 1'000'000LL) error_at("exponent literal has too many decimals", start);
      }
    }
    if (!any) error_at("exponent must be a rational constant", start);
    try {
      return Rational::make(whole, den);
    } catch (const InvalidArgument& ex) {
      error_at(ex.what(), start);
    }
  }

  double number() {
    skip_space();
    const std::size_t start = pos_;
    std::size_t end = pos_;
    while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) ++end;
    if (end + 1 < text_.size() && text_[end] == '.' &&
        std::isdigit(static_cast<unsigned char>(text_[end + 1]))) {
      ++end;
      while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) ++end;
    }
    if (end < text_.size() && (text_[end] == 'e' || text_[end] == 'E')) {
      std::size_t e = end + 1;
      if (e < text_.size() && (text_[e] == '+' || text_[e] == '-')) ++e;
      if (e < text_.size() && std::isdigit(static_cast<unsigned char>(text_[e]))) {
        while (e < text_.size() && std::isdigit(static_cast<unsigned char>(text_[e]))) ++e;
        end = e;
      }
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + end, v);
    if (ec != std::errc() || ptr != text_.data() + end || !std::isfinite(v))
      error_at("malformed number", start);
    pos_ = end;
    return v;
  }

  std::string identifier() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  double constant_argument() {
    const std::size_t start = pos_;
    ExprParser sub(*this);
    sub.vars_ = {};
    Expr e;
    try {
      e = simplify(sub.expression());
    } catch (const UnboundVariableError& ex) {
      error_at("bump bounds must be numeric constants, found '" + ex.name() + "'", start);
    }
    pos_ = sub.pos_;
    if (!e.is_constant()) error_at("bump bounds must be numeric constants", start);
    return e.value();
  }

  Expr primary() {
    const char c = peek();
    if (c == '\0') error("unexpected end of input");
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return Expr(number());
    if (accept('(')) {
      Expr e = expression();
      expect(')');
      return e;
    }
    if (is_ident_start(c)) {
      const std::size_t start = pos_;
      const std::string name = identifier();
      if (peek() == '(') {
        accept('(');
        if (name == "bump") {
          Expr arg = expression();
          expect(';');
          const double lo = constant_argument();
          expect(',');
          const double hi = constant_argument();
          int order = 0;
          if (accept(';')) {
            skip_space();
            const std::size_t at = pos_;
            const double o = number();
            if (o < 0 || o != std::floor(o) || o > 64) error_at("bump derivative order must be a small integer", at);
            order = static_cast<int>(o);
          }
          expect(')');
          if (!(lo < hi)) error_at("bump requires lower bound < upper bound", start);
          return bump(arg, lo, hi, order);
        }
        static const std::pair<const char*, Fn> kFns[] = {
            {"sin", Fn::Sin}, {"cos", Fn::Cos}, {"exp", Fn::Exp}, {"log", Fn::Log}, {"tanh", Fn::Tanh}};
        for (const auto& [fname, fn] : kFns) {
          if (name == fname) {
            Expr arg = expression();
            expect(')');
            return apply(fn, arg);
          }
        }
        error_at("unknown function '" + name + "'", start);
      }
      if (std::find(vars_.begin(), vars_.end(), name) == vars_.end()) {
        throw UnboundVariableError(name, where(start));
      }
      return Expr::variable(name);
    }
    error(std::string("unexpected '") + c + "'");
  }

  std::string_view text_;
  std::span<const std::string> vars_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse_expr(std::string_view text, std::span<const std::string> allowed_vars) {
  ExprParser p(text, allowed_vars);
  return p.parse();
}

}  // namespace jetholo
