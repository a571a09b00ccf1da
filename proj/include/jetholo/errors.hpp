#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace jetholo {

/// Location inside a piece of source text (1-based line and column).
struct SourcePos {
  std::size_t offset = 0;
  std::size_t line = 1;
  std::size_t column = 1;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, SourcePos pos)
      : std::runtime_error(std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " +
                           message),
        message_(message),
        pos_(pos) {}

  const std::string& message() const { return message_; }
  SourcePos position() const { return pos_; }

 private:
  std::string message_;
  SourcePos pos_;
};

/// An identifier that is neither a declared variable nor a known function.
class UnboundVariableError : public std::runtime_error {
 public:
  explicit UnboundVariableError(const std::string& name, SourcePos pos = {})
      : std::runtime_error("unbound variable '" + name + "'"), name_(name), pos_(pos) {}

  const std::string& name() const { return name_; }
  /// Position of the identifier when raised by a parser; default-constructed otherwise.
  SourcePos position() const { return pos_; }

 private:
  std::string name_;
  SourcePos pos_;
};

/// Numeric domain violation during evaluation (log of non-positive, division by zero, ...).
class EvalError : public std::runtime_error {
 public:
  EvalError(const std::string& what, const std::string& subexpr)
      : std::runtime_error(what + " in '" + subexpr + "'"), subexpr_(subexpr) {}

  const std::string& subexpression() const { return subexpr_; }

 private:
  std::string subexpr_;
};

/// Contract violations between modules (wrong dimensions, bad orders, non-projectable fields).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace jetholo
