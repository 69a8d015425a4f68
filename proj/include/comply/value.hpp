// comply/value.hpp - Exact attribute values and three-valued truth
#pragma once

#include <boost/rational.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace comply
{

/// Exact rational number. Decimal literals are stored exactly, so `2.5` is 5/2.
using Number = boost::rational<std::int64_t>;

struct Symbol
{
  std::string name;

  friend bool operator==(const Symbol &, const Symbol &) = default;
  friend auto operator<=>(const Symbol &, const Symbol &) = default;
};

/// Fact value: number, bare symbol, or boolean.
using Value = std::variant<Number, Symbol, bool>;

enum class ValueKind { number, symbol, boolean };

inline ValueKind kind_of(const Value & v)
{
  return static_cast<ValueKind>(v.index());
}

inline const char * kind_name(ValueKind k)
{
  switch (k) {
    case ValueKind::number: return "number";
    case ValueKind::symbol: return "symbol";
    case ValueKind::boolean: return "boolean";
  }
  return "?";
}

inline Value make_int(std::int64_t n) { return Number(n); }
inline Value make_symbol(std::string name) { return Symbol{std::move(name)}; }

/// Thrown when a comparison or arithmetic mixes incompatible value kinds.
class EvaluationError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

namespace detail
{
inline bool only_twos_and_fives(std::int64_t d)
{
  while (d % 2 == 0) d /= 2;
  while (d % 5 == 0) d /= 5;
  return d == 1;
}
}  // namespace detail

/// Integers print bare, terminating fractions as decimals, anything else as n/d.
inline std::string format_number(const Number & n)
{
  if (n.denominator() == 1) {
    return std::to_string(n.numerator());
  }
  if (!detail::only_twos_and_fives(n.denominator())) {
    return std::to_string(n.numerator()) + "/" + std::to_string(n.denominator());
  }
  std::int64_t num = n.numerator();
  std::string out;
  if (num < 0) {
    out += '-';
    num = -num;
  }
  const std::int64_t den = n.denominator();
  out += std::to_string(num / den);
  out += '.';
  std::int64_t rem = num % den;
  while (rem != 0) {
    rem *= 10;
    out += static_cast<char>('0' + rem / den);
    rem %= den;
  }
  return out;
}

/// Parses `digits[.digits]`; returns nullopt on malformed or overflowing input.
inline std::optional<Number> parse_decimal(std::string_view text)
{
  if (text.empty()) return std::nullopt;
  std::int64_t num = 0;
  std::int64_t den = 1;
  bool seen_dot = false;
  bool any_digit = false;
  constexpr std::int64_t limit = 100000000000000000;  // 1e17 keeps headroom for *10
  for (char c : text) {
    if (c == '.') {
      if (seen_dot) return std::nullopt;
      seen_dot = true;
      continue;
    }
    if (c < '0' || c > '9') return std::nullopt;
    any_digit = true;
    if (num >= limit || (seen_dot && den >= limit)) return std::nullopt;
    num = num * 10 + (c - '0');
    if (seen_dot) den *= 10;
  }
  if (!any_digit || text.back() == '.') return std::nullopt;
  return Number(num, den);
}

inline std::string to_string(const Value & v)
{
  switch (kind_of(v)) {
    case ValueKind::number: return format_number(std::get<Number>(v));
    case ValueKind::symbol: return std::get<Symbol>(v).name;
    case ValueKind::boolean: return std::get<bool>(v) ? "true" : "false";
  }
  return "?";
}

enum class CmpOp { lt, le, eq, ne, ge, gt };
enum class ArithOp { add, sub, mul };

inline const char * to_string(CmpOp op)
{
  switch (op) {
    case CmpOp::lt: return "<";
    case CmpOp::le: return "<=";
    case CmpOp::eq: return "=";
    case CmpOp::ne: return "!=";
    case CmpOp::ge: return ">=";
    case CmpOp::gt: return ">";
  }
  return "?";
}

inline const char * to_string(ArithOp op)
{
  switch (op) {
    case ArithOp::add: return "+";
    case ArithOp::sub: return "-";
    case ArithOp::mul: return "*";
  }
  return "?";
}

inline CmpOp negate(CmpOp op)
{
  switch (op) {
    case CmpOp::lt: return CmpOp::ge;
    case CmpOp::le: return CmpOp::gt;
    case CmpOp::eq: return CmpOp::ne;
    case CmpOp::ne: return CmpOp::eq;
    case CmpOp::ge: return CmpOp::lt;
    case CmpOp::gt: return CmpOp::le;
  }
  return op;
}

/// Numbers support every operator; symbols and booleans only `=` and `!=`.
inline bool compare(const Value & lhs, CmpOp op, const Value & rhs)
{
  const ValueKind lk = kind_of(lhs);
  const ValueKind rk = kind_of(rhs);
  if (lk != rk) {
    throw EvaluationError(
      std::string("type mismatch: ") + kind_name(lk) + " " + to_string(op) + " " + kind_name(rk));
  }
  if (lk == ValueKind::number) {
    const Number & a = std::get<Number>(lhs);
    const Number & b = std::get<Number>(rhs);
    switch (op) {
      case CmpOp::lt: return a < b;
      case CmpOp::le: return a <= b;
      case CmpOp::eq: return a == b;
      case CmpOp::ne: return a != b;
      case CmpOp::ge: return a >= b;
      case CmpOp::gt: return a > b;
    }
  }
  if (op == CmpOp::eq) return lhs == rhs;
  if (op == CmpOp::ne) return lhs != rhs;
  throw EvaluationError(
    std::string("operator ") + to_string(op) + " is not defined on " + kind_name(lk) + " values");
}

inline Number arithmetic(const Value & lhs, ArithOp op, const Value & rhs)
{
  if (kind_of(lhs) != ValueKind::number || kind_of(rhs) != ValueKind::number) {
    throw EvaluationError(
      std::string("arithmetic ") + to_string(op) + " needs numbers, got " +
      kind_name(kind_of(lhs)) + " and " + kind_name(kind_of(rhs)));
  }
  const Number & a = std::get<Number>(lhs);
  const Number & b = std::get<Number>(rhs);
  switch (op) {
    case ArithOp::add: return a + b;
    case ArithOp::sub: return a - b;
    case ArithOp::mul: return a * b;
  }
  return a;
}

/// Kleene truth value.
enum class Truth { false_, true_, unknown };

inline Truth to_truth(bool b) { return b ? Truth::true_ : Truth::false_; }

inline const char * to_string(Truth t)
{
  switch (t) {
    case Truth::false_: return "false";
    case Truth::true_: return "true";
    case Truth::unknown: return "unknown";
  }
  return "?";
}

inline Truth kleene_not(Truth t)
{
  if (t == Truth::unknown) return t;
  return t == Truth::true_ ? Truth::false_ : Truth::true_;
}

}  // namespace comply
