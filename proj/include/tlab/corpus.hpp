#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tlab/vocab.hpp"

namespace tlab {

enum class PromptKind { verifiable, open };
enum class PoolKind { open, in_domain, mixed };

std::string_view to_string(PromptKind k);
std::string_view to_string(PoolKind k);
PromptKind parse_prompt_kind(std::string_view s);
PoolKind parse_pool_kind(std::string_view s);

// Domain tags produced by the generator.
namespace domains {
inline constexpr std::string_view arithmetic = "arithmetic";
inline constexpr std::string_view sort = "sort";
inline constexpr std::string_view copy = "copy";
inline constexpr std::string_view writing = "writing";
}  // namespace domains

struct Prompt {
  std::string id;
  std::string domain;
  PromptKind kind = PromptKind::verifiable;
  TokenSeq tokens;
  std::optional<TokenSeq> gold;                                // verifiable only
  std::optional<std::vector<std::string>> required_aspects;    // open only

  bool operator==(const Prompt&) const = default;
};

struct PromptPool {
  std::string name;
  PoolKind kind = PoolKind::mixed;
  std::vector<Prompt> prompts;
  std::string provenance;

  bool empty() const { return prompts.empty(); }
  std::size_t size() const { return prompts.size(); }
  // Throws DataError on the first broken invariant.
  void validate(const Vocabulary& vocab, int max_prompt_len) const;
  // First n prompts as a new pool (nested-subset construction).
  PromptPool prefix(std::size_t n) const;

  bool operator==(const PromptPool&) const = default;
};

struct TaskCounts {
  int arithmetic = 200;
  int sort = 100;
  int copy = 100;
  int writing = 200;
};

struct TaskSuite {
  Vocabulary vocab;
  PromptPool open;        // open-ended writing prompts
  PromptPool in_domain;   // verifiable arithmetic prompts
  PromptPool transduce;   // verifiable sort/copy training prompts
  // Held-out pools keyed by benchmark name: arith-hard, arith-comp,
  // transduce, open-quality.
  std::map<std::string, PromptPool> benchmarks;
};

inline constexpr int kDefaultMaxPromptLen = 16;

// Builds every pool from the seed alone. Each family gets `count` training
// prompts and count/2 held-out prompts; arithmetic also yields a held-out
// multi-digit split.
TaskSuite generate_task_suite(std::uint64_t seed, const TaskCounts& counts, int vocab_size,
                              int max_prompt_len = kDefaultMaxPromptLen);

// Re-derives the answer of a verifiable task from its prompt tokens.
// Returns nullopt for domains without a solver or unparsable prompts.
std::optional<TokenSeq> solve_task(std::string_view domain, std::span<const TokenId> prompt,
                                   const Vocabulary& vocab);

// JSONL prompt files: a header {"pool", "kind"} followed by one record per line.
void write_prompt_pool(std::ostream& out, const PromptPool& pool, const Vocabulary& vocab);
PromptPool read_prompt_pool(std::istream& in, const Vocabulary& vocab,
                            int max_prompt_len = kDefaultMaxPromptLen);
void save_prompt_pool(const std::filesystem::path& path, const PromptPool& pool,
                      const Vocabulary& vocab);
PromptPool load_prompt_pool(const std::filesystem::path& path, const Vocabulary& vocab,
                            int max_prompt_len = kDefaultMaxPromptLen);

struct TopicRule {
  std::string keyword;  // "*" matches everything
  std::string bucket;
};

struct BucketShare {
  std::string bucket;
  int count = 0;
  double percent = 0.0;
};

std::vector<TopicRule> default_topic_rules();
std::vector<TopicRule> load_topic_rules(const std::filesystem::path& path);

// Assigns each prompt to the first rule whose keyword equals one of its
// token surfaces or its domain tag. Buckets are reported in rule order.
std::vector<BucketShare> topic_audit(const PromptPool& pool, const Vocabulary& vocab,
                                     std::span<const TopicRule> rules);

}  // namespace tlab
