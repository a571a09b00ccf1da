#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jetholo/symexpr.hpp"

namespace jetholo::detail {

struct Node {
  Op op = Op::Const;
  double value = 0.0;
  std::string name;
  Fn fn = Fn::Sin;
  Rational exponent;
  double lo = 0.0;
  double hi = 0.0;
  int order = 0;
  std::vector<Expr> args;
  std::size_t hash = 0;
  std::size_t size = 1;
  std::uint64_t mask = 0;
};

}  // namespace jetholo::detail
