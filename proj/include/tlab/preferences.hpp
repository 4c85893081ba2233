#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tlab/reward_model.hpp"

namespace tlab {

// Number of rubric criteria a response to an open prompt satisfies: voluntary
// termination, marker discipline, one per covered required aspect, section
// structure (at least one section and every section covers a required
// aspect), and no extraneous aspects.
int rubric_criteria(const Vocabulary& vocab, int max_response_len, const Prompt& prompt,
                    std::span<const TokenId> response);

// Every distinct response the rubric synthesizer can render for a prompt.
std::vector<TokenSeq> response_catalog(const Vocabulary& vocab, int max_response_len,
                                       const Prompt& prompt);

// Reference answer: terminated, disciplined, covers every required aspect,
// no sections. The open-quality baseline system.
TokenSeq reference_response(const Vocabulary& vocab, int max_response_len, const Prompt& prompt);

// Number of unordered catalog pairs with a strict rubric difference.
std::uint64_t distinct_pair_count(const Vocabulary& vocab, int max_response_len,
                                  const PromptPool& pool);

// Samples n distinct strict-preference pairs from the catalogs of an open
// pool; ties are never emitted.
std::vector<PreferencePair> synth_preferences(const PromptPool& pool, const Vocabulary& vocab,
                                              int max_response_len, int n, std::uint64_t seed);

void save_preferences(const std::filesystem::path& path, std::span<const PreferencePair> pairs,
                      const Vocabulary& vocab);
std::vector<PreferencePair> load_preferences(const std::filesystem::path& path,
                                             const PromptPool& pool, const Vocabulary& vocab);

}  // namespace tlab
