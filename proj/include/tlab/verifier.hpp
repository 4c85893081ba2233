#pragma once

#include <optional>
#include <span>
#include <string>

#include "tlab/vocab.hpp"

namespace tlab {

struct VerifierKind {
  enum class Type { exact, numeric, expression };
  Type type = Type::exact;
  double tolerance = 0.0;  // numeric only

  static VerifierKind exact() { return {Type::exact, 0.0}; }
  static VerifierKind numeric(double tol);
  static VerifierKind expression() { return {Type::expression, 0.0}; }
};

// Tokens after the final answer marker, up to <eos> (or the end).
std::optional<std::span<const TokenId>> marked_answer(std::span<const TokenId> response);

// 1 iff the marked answer equals gold token for token.
int verify_exact(std::span<const TokenId> gold, std::span<const TokenId> response);

// 1 iff the marked answer parses as a number within tolerance of gold.
int verify_numeric(std::span<const TokenId> gold, std::span<const TokenId> response,
                   double tolerance, const Vocabulary& vocab);

// 1 iff the marked answer is an expression exactly equal to gold's value.
int verify_expression_tokens(std::span<const TokenId> gold, std::span<const TokenId> response,
                             const Vocabulary& vocab);

int verify(const VerifierKind& kind, std::span<const TokenId> gold,
           std::span<const TokenId> response, const Vocabulary& vocab);

}  // namespace tlab
