#include "tlab/verifier.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "tlab/error.hpp"
#include "tlab/expr.hpp"

namespace tlab {

namespace {

std::string concat_surfaces(std::span<const TokenId> seq, const Vocabulary& vocab) {
  std::string s;
  for (auto t : seq) s += vocab.surface(t);
  return s;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

VerifierKind VerifierKind::numeric(double tol) {
  if (!(tol >= 0)) throw ConfigError("numeric verifier tolerance must be >= 0");
  return {Type::numeric, tol};
}

std::optional<std::span<const TokenId>> marked_answer(std::span<const TokenId> response) {
  auto rit = std::find(response.rbegin(), response.rend(), kAnswerMarker);
  if (rit == response.rend()) return std::nullopt;
  auto begin = rit.base();  // one past the marker
  auto end = std::find(begin, response.end(), kEos);
  return std::span<const TokenId>(begin, end);
}

int verify_exact(std::span<const TokenId> gold, std::span<const TokenId> response) {
  if (gold.empty()) throw ConfigError("verify_exact requires a non-empty gold answer");
  auto ans = marked_answer(response);
  if (!ans) return 0;
  return std::equal(ans->begin(), ans->end(), gold.begin(), gold.end()) ? 1 : 0;
}

int verify_numeric(std::span<const TokenId> gold, std::span<const TokenId> response,
                   double tolerance, const Vocabulary& vocab) {
  auto g = parse_number(concat_surfaces(gold, vocab));
  if (!g) throw ConfigError("gold answer '" + vocab.render(gold) + "' is not a number");
  auto ans = marked_answer(response);
  if (!ans) return 0;
  auto a = parse_number(concat_surfaces(*ans, vocab));
  if (!a) return 0;
  return std::fabs(*a - *g) <= tolerance ? 1 : 0;
}

int verify_expression_tokens(std::span<const TokenId> gold, std::span<const TokenId> response,
                             const Vocabulary& vocab) {
  auto ans = marked_answer(response);
  if (!ans || ans->empty()) return 0;
  try {
    return verify_expression(concat_surfaces(gold, vocab), concat_surfaces(*ans, vocab))
                   .equivalent
               ? 1
               : 0;
  } catch (const ExprSyntaxError&) {
    return 0;
  }
}

int verify(const VerifierKind& kind, std::span<const TokenId> gold,
           std::span<const TokenId> response, const Vocabulary& vocab) {
  switch (kind.type) {
    case VerifierKind::Type::exact: return verify_exact(gold, response);
    case VerifierKind::Type::numeric: return verify_numeric(gold, response, kind.tolerance, vocab);
    case VerifierKind::Type::expression: return verify_expression_tokens(gold, response, vocab);
  }
  return 0;
}

}  // namespace tlab
