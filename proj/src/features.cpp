#include "tlab/features.hpp"

#include <algorithm>

#include "tlab/error.hpp"

namespace tlab {

int domain_slot(std::string_view domain) {
  if (domain == domains::arithmetic) return 0;
  if (domain == domains::sort) return 1;
  if (domain == domains::copy) return 2;
  if (domain == domains::writing) return 3;
  return kDomainSlots - 1;
}

FeatureSpec::FeatureSpec(Vocabulary vocab, int max_response_len)
    : vocab_(std::move(vocab)), max_response_len_(max_response_len) {
  if (max_response_len_ < 1) throw ConfigError("max_resp_len must be positive");
  if (vocab_.aspects().size() > 64) throw ConfigError("at most 64 aspect tokens are supported");
  domain_offset_ = bigram_dim();
  format_offset_ = domain_offset_ + domain_dim();
  skill_offset_ = format_offset_ + kFormatDim;
  total_dim_ = skill_offset_ + kSkillDim * kSkillSlots;
  spec_id_ = "loglin1/" + vocab_.layout_id() + "/R" + std::to_string(max_response_len_);
}

std::string FeatureSpec::feature_name(int index) const {
  static const char* kFormatNames[] = {"mark_first",  "mark_ready",   "mark_repeat",
                                       "eos_after_answer", "eos_early", "aspect_new",
                                       "aspect_other", "section_open"};
  static const char* kSkillNames[] = {"arithmetic", "sort", "copy", "writing"};
  if (index < 0 || index >= total_dim_) throw ConfigError("feature index out of range");
  const int v = vocab_size();
  if (index < domain_offset_) {
    const int prev = index / v - 1;
    const std::string from = prev < 0 ? "^" : vocab_.surface(static_cast<TokenId>(prev));
    return "bigram[" + from + "->" + vocab_.surface(static_cast<TokenId>(index % v)) + "]";
  }
  if (index < format_offset_) {
    const int rel = index - domain_offset_;
    return "domain[" + std::to_string(rel / v) + "," +
           vocab_.surface(static_cast<TokenId>(rel % v)) + "]";
  }
  if (index < skill_offset_) return std::string("format[") + kFormatNames[index - format_offset_] + "]";
  static const char* kSkillKinds[] = {",first]", ",next]", ",end]"};
  const int rel = index - skill_offset_;
  return std::string("skill[") + kSkillNames[rel / kSkillDim] + kSkillKinds[rel % kSkillDim];
}

std::optional<TokenId> summary_token(const Vocabulary& vocab, const Prompt& prompt) {
  if (prompt.domain != domains::writing) return std::nullopt;
  for (auto t : prompt.tokens)
    if (std::find(vocab.topics().begin(), vocab.topics().end(), t) != vocab.topics().end()) return t;
  return std::nullopt;
}

PromptContext FeatureSpec::context(const Prompt& prompt) const {
  PromptContext ctx;
  ctx.domain = domain_slot(prompt.domain);
  if (prompt.kind == PromptKind::verifiable && ctx.domain < kSkillSlots) {
    ctx.solution = solve_task(prompt.domain, prompt.tokens, vocab_);
  } else if (prompt.kind == PromptKind::open) {
    if (auto t = summary_token(vocab_, prompt)) ctx.solution = TokenSeq{*t};
  }
  if (ctx.solution) ctx.skill = ctx.domain;
  if (prompt.required_aspects) {
    for (const auto& a : *prompt.required_aspects) {
      auto id = vocab_.find(a);
      if (!id || !vocab_.is_aspect(*id))
        throw DataError("prompt '" + prompt.id + "' requires unknown aspect '" + a + "'");
      ctx.required |= std::uint64_t{1} << vocab_.aspect_index(*id);
    }
  }
  return ctx;
}

void FeatureSpec::advance(const PromptContext& ctx, StepState& s, TokenId token) const {
  if (s.marker) {
    if (s.answer_match >= 0) {
      const auto& sol = ctx.solution;
      if (sol && s.answer_match < static_cast<int>(sol->size()) &&
          (*sol)[static_cast<std::size_t>(s.answer_match)] == token)
        ++s.answer_match;
      else
        s.answer_match = -1;
    }
    ++s.since_marker;
  }
  if (token == kAnswerMarker) {
    if (!s.marker) {
      s.marker = true;
      s.since_marker = 0;
      s.answer_match = 0;
    } else {
      s.answer_match = -1;
    }
  }
  if (int a = vocab_.aspect_index(token); a >= 0) s.covered |= std::uint64_t{1} << a;
  s.sec_prev = vocab_.section() && token == *vocab_.section();
  s.prev = token;
  ++s.length;
}

StepState FeatureSpec::state_after(const PromptContext& ctx,
                                   std::span<const TokenId> prefix) const {
  StepState s;
  for (auto t : prefix) {
    if (t >= vocab_size()) throw DataError("token id out of vocabulary");
    advance(ctx, s, t);
  }
  return s;
}

void FeatureSpec::active_features(const PromptContext& ctx, const StepState& s,
                                  TokenId cand, FeatureList& out) const {
  out.size = 0;
  out.push(bigram_index(s.prev, cand));
  out.push(domain_index(ctx.domain, cand));
  if (cand == kAnswerMarker) {
    if (s.marker) {
      out.push(format_index(FormatFeature::mark_repeat));
    } else {
      out.push(format_index(FormatFeature::mark_first));
      if ((s.covered & ctx.required) == ctx.required)
        out.push(format_index(FormatFeature::mark_ready));
    }
  } else if (cand == kEos) {
    out.push(format_index(s.marker && s.since_marker >= 1 ? FormatFeature::eos_after_answer
                                                          : FormatFeature::eos_early));
  } else if (int a = vocab_.aspect_index(cand); a >= 0) {
    const std::uint64_t bit = std::uint64_t{1} << a;
    const bool fresh = !s.marker && (ctx.required & bit) && !(s.covered & bit);
    out.push(format_index(fresh ? FormatFeature::aspect_new : FormatFeature::aspect_other));
  } else if (vocab_.section() && cand == *vocab_.section() && !s.marker && !s.sec_prev) {
    out.push(format_index(FormatFeature::section_open));
  }
  if (ctx.skill >= 0 && s.marker && s.answer_match >= 0) {
    const auto& sol = *ctx.solution;
    const auto k = static_cast<std::size_t>(s.answer_match);
    if (k < sol.size() && cand == sol[k])
      out.push(skill_index(ctx.skill, k == 0 ? SkillFeature::first : SkillFeature::next));
    if (k == sol.size() && cand == kEos) out.push(skill_index(ctx.skill, SkillFeature::end));
  }
}

}  // namespace tlab
