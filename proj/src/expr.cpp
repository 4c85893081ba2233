#include "tlab/expr.hpp"

namespace tlab {

namespace {

struct DivisionByZero {};

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  Rational parse() {
    Rational v = expr();
    skip_ws();
    if (pos_ != s_.size()) throw ExprSyntaxError(pos_, "operator or end of input");
    return v;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  bool accept(std::string_view tok) {
    skip_ws();
    if (s_.substr(pos_, tok.size()) == tok) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  bool accept_minus() { return accept("-") || accept("−"); }
  bool accept_times() { return accept("*") || accept("×"); }
  bool accept_divide() { return accept("/") || accept("÷"); }

  Rational expr() {
    Rational v = term();
    for (;;) {
      if (accept("+")) v += term();
      else if (accept_minus()) v -= term();
      else return v;
    }
  }

  Rational term() {
    Rational v = unary();
    for (;;) {
      if (accept_times()) {
        v *= unary();
      } else if (accept_divide()) {
        Rational d = unary();
        if (d == 0) throw DivisionByZero{};
        v /= d;
      } else {
        return v;
      }
    }
  }

  Rational unary() {
    if (accept_minus()) return -unary();
    if (accept("+")) return unary();
    return primary();
  }

  Rational primary() {
    skip_ws();
    if (accept("(")) {
      Rational v = expr();
      if (!accept(")")) throw ExprSyntaxError(pos_, "')'");
      return v;
    }
    return number();
  }

  Rational number() {
    skip_ws();
    const std::size_t start = pos_;
    boost::multiprecision::cpp_int num = 0;
    boost::multiprecision::cpp_int den = 1;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
      num = num * 10 + (s_[pos_++] - '0');
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      const std::size_t frac_start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        num = num * 10 + (s_[pos_++] - '0');
        den *= 10;
      }
      if (pos_ == frac_start) throw ExprSyntaxError(pos_, "digit after decimal point");
    } else if (pos_ == start) {
      throw ExprSyntaxError(pos_, "number, '(' or unary minus");
    }
    return Rational(num, den);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::optional<Rational> evaluate_expression(std::string_view text) {
  try {
    return Parser(text).parse();
  } catch (const DivisionByZero&) {
    return std::nullopt;
  }
}

ExpressionCheck verify_expression(std::string_view gold_expr, std::string_view answer_expr) {
  // Parse both sides fully first so syntax errors surface even when the
  // other side divides by zero.
  std::optional<Rational> gold, answer;
  bool div0 = false;
  try {
    gold = Parser(gold_expr).parse();
  } catch (const DivisionByZero&) {
    div0 = true;
  }
  try {
    answer = Parser(answer_expr).parse();
  } catch (const DivisionByZero&) {
    div0 = true;
  }
  if (div0) return {false, true};
  return {*gold == *answer, false};
}

}  // namespace tlab
