#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

#include "tlab/error.hpp"

namespace tlab {

using Rational = boost::multiprecision::cpp_rational;

class ExprSyntaxError : public DataError {
 public:
  ExprSyntaxError(std::size_t position, std::string expected)
      : DataError("syntax error at position " + std::to_string(position) + ": expected " +
                  expected),
        position_(position),
        expected_(std::move(expected)) {}
  std::size_t position() const { return position_; }
  const std::string& expected() const { return expected_; }

 private:
  std::size_t position_;
  std::string expected_;
};

// Exact value of an expression over integers and decimals with + - * /,
// unary minus and parentheses (ASCII or the Unicode minus/times/divide
// signs). nullopt when the expression divides by zero; throws
// ExprSyntaxError otherwise-invalid input.
std::optional<Rational> evaluate_expression(std::string_view text);

struct ExpressionCheck {
  bool equivalent = false;
  bool division_by_zero = false;
  explicit operator bool() const { return equivalent; }
};

ExpressionCheck verify_expression(std::string_view gold_expr, std::string_view answer_expr);

}  // namespace tlab
