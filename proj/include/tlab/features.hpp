#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "tlab/corpus.hpp"
#include "tlab/vocab.hpp"

namespace tlab {

// Response-format indicators shared by every task family. They are the
// channel through which behavior learned on one environment carries over to
// another.
enum class FormatFeature : int {
  mark_first,        // <ans> while no marker has been emitted
  mark_ready,        // <ans> once every required aspect is covered
  mark_repeat,       // <ans> after a marker was already emitted
  eos_after_answer,  // <eos> with at least one token after the marker
  eos_early,         // any other voluntary <eos>
  aspect_new,        // a required, not yet covered aspect before the marker
  aspect_other,      // any other aspect token
  section_open,      // <sec> before the marker, not directly after another <sec>
  count
};
inline constexpr int kFormatDim = static_cast<int>(FormatFeature::count);

// Domain slots for the domain-tag x token family; unknown domains share the
// last slot.
inline constexpr int kDomainSlots = 5;
// Families with a latent answer: arithmetic, sort and copy (the solver's
// output) and writing (a one-token summary naming the prompt topic).
inline constexpr int kSkillSlots = 4;

// Per skill slot: the first solver token after the marker, any later solver
// token, and <eos> right after the full solution.
enum class SkillFeature : int { first, next, end, count };
inline constexpr int kSkillDim = static_cast<int>(SkillFeature::count);

int domain_slot(std::string_view domain);

// Topic word of a writing prompt; the latent one-token summary.
std::optional<TokenId> summary_token(const Vocabulary& vocab, const Prompt& prompt);

// Per-prompt quantities the extractor needs, computed once per prompt.
struct PromptContext {
  int domain = kDomainSlots - 1;
  int skill = -1;  // skill slot, -1 when the domain has no latent answer
  std::uint64_t required = 0;  // bit i set iff aspect i is required
  std::optional<TokenSeq> solution;
};

// Summary of a response prefix; advanced one token at a time.
struct StepState {
  int length = 0;
  int prev = -1;  // -1 before the first token
  bool marker = false;
  int since_marker = 0;
  std::uint64_t covered = 0;
  int answer_match = 0;  // matched solver tokens after the marker, -1 on mismatch
  bool sec_prev = false;
};

struct FeatureList {
  std::array<int, 6> index{};
  int size = 0;
  void push(int i) { index[static_cast<std::size_t>(size++)] = i; }
  std::span<const int> view() const { return {index.data(), static_cast<std::size_t>(size)}; }
};

// Binary feature map of the log-linear policy. Families in order: bigram
// (previous token or start -> next token), domain slot x next token, format
// indicators, skill indicators (solver token, solver end).
class FeatureSpec {
 public:
  FeatureSpec(Vocabulary vocab, int max_response_len);

  const Vocabulary& vocab() const { return vocab_; }
  int vocab_size() const { return vocab_.size(); }
  int max_response_len() const { return max_response_len_; }
  int total_dim() const { return total_dim_; }
  const std::string& spec_id() const { return spec_id_; }

  int bigram_dim() const { return (vocab_size() + 1) * vocab_size(); }
  int domain_dim() const { return kDomainSlots * vocab_size(); }
  int bigram_index(int prev, TokenId next) const {
    return (prev + 1) * vocab_size() + next;
  }
  int domain_index(int slot, TokenId next) const {
    return domain_offset_ + slot * vocab_size() + next;
  }
  int format_index(FormatFeature f) const { return format_offset_ + static_cast<int>(f); }
  int skill_index(int slot, SkillFeature f) const {
    return skill_offset_ + kSkillDim * slot + static_cast<int>(f);
  }
  bool is_format(int index) const {
    return index >= format_offset_ && index < format_offset_ + kFormatDim;
  }
  bool is_skill(int index) const { return index >= skill_offset_ && index < total_dim_; }
  SkillFeature skill_kind(int index) const {
    return static_cast<SkillFeature>((index - skill_offset_) % kSkillDim);
  }
  // Human-readable name; distinct for every index in [0, total_dim).
  std::string feature_name(int index) const;

  PromptContext context(const Prompt& prompt) const;
  StepState state_after(const PromptContext& ctx, std::span<const TokenId> prefix) const;
  void advance(const PromptContext& ctx, StepState& state, TokenId token) const;
  void active_features(const PromptContext& ctx, const StepState& state, TokenId candidate,
                       FeatureList& out) const;

 private:
  Vocabulary vocab_;
  int max_response_len_;
  int domain_offset_;
  int format_offset_;
  int skill_offset_;
  int total_dim_;
  std::string spec_id_;
};

}  // namespace tlab
