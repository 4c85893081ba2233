#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tlab/features.hpp"

namespace tlab {

// Weights of the log-linear policy, bound to a FeatureSpec by spec_id.
struct PolicyParams {
  std::string spec_id;
  std::vector<double> weights;

  bool operator==(const PolicyParams&) const = default;
};

// Frozen snapshot anchoring the KL penalty.
class ReferencePolicy {
 public:
  static ReferencePolicy snapshot(const PolicyParams& params) { return ReferencePolicy(params); }
  const PolicyParams& params() const { return frozen_; }

 private:
  explicit ReferencePolicy(PolicyParams p) : frozen_(std::move(p)) {}
  PolicyParams frozen_;
};

struct InitOptions {
  double noise = 0.1;             // half-width of the uniform draw
  double format_bias = 0.0;       // added to every format weight
  double skill_prior = 6.0;       // added to the first-token and end skill weights
  double skill_next_prior = 3.0;  // added to the later-token skill weights
  double arith_next_prior = 0.0;  // the same for arithmetic (multi-digit answers)
  double digit_prior = 1.0;       // added to domain x digit weights of verifiable families
};

PolicyParams init_policy(const FeatureSpec& spec, std::uint64_t seed, const InitOptions& opt = {});
PolicyParams zero_policy(const FeatureSpec& spec);

void check_compatible(const FeatureSpec& spec, const PolicyParams& params);

// Numerically stable softmax; -inf entries get probability 0.
std::vector<double> softmax(std::span<const double> scores);

// Per-token scores at a state (no forcing applied).
void step_scores(const FeatureSpec& spec, const PolicyParams& params, const PromptContext& ctx,
                 const StepState& state, std::span<double> out);
// Next-token distribution; forced to <eos> at the last allowed position.
void step_distribution(const FeatureSpec& spec, const PolicyParams& params,
                       const PromptContext& ctx, const StepState& state, std::span<double> out);

std::vector<double> next_token_dist(const FeatureSpec& spec, const PolicyParams& params,
                                    const Prompt& prompt, std::span<const TokenId> prefix);

TokenSeq sample_response(const FeatureSpec& spec, const PolicyParams& params,
                         const PromptContext& ctx, std::uint64_t rng_seed);
TokenSeq sample_response(const FeatureSpec& spec, const PolicyParams& params,
                         const Prompt& prompt, std::uint64_t rng_seed);
// Argmax decoding; ties go to the lowest token id.
TokenSeq greedy_response(const FeatureSpec& spec, const PolicyParams& params,
                         const PromptContext& ctx);

// Throws DataError unless the response ends with its only <eos> within the
// length limit.
void check_response(const FeatureSpec& spec, std::span<const TokenId> response);

std::vector<double> step_logprobs(const FeatureSpec& spec, const PolicyParams& params,
                                  const PromptContext& ctx, std::span<const TokenId> response);
double sequence_logprob(const FeatureSpec& spec, const PolicyParams& params,
                        const PromptContext& ctx, std::span<const TokenId> response);
double sequence_logprob(const FeatureSpec& spec, const PolicyParams& params,
                        const Prompt& prompt, std::span<const TokenId> response);

// grad += sum_t step_weight[t] * (phi(a_t) - E_pi[phi]). An empty
// step_weight means weight 1 on every step.
void accumulate_logprob_gradient(const FeatureSpec& spec, const PolicyParams& params,
                                 const PromptContext& ctx, std::span<const TokenId> response,
                                 std::span<const double> step_weight, std::span<double> grad);
std::vector<double> logprob_gradient(const FeatureSpec& spec, const PolicyParams& params,
                                     const Prompt& prompt, std::span<const TokenId> response);

double exact_step_kl(const FeatureSpec& spec, const PolicyParams& policy,
                     const ReferencePolicy& reference, const PromptContext& ctx,
                     const StepState& state);
double exact_step_kl(const FeatureSpec& spec, const PolicyParams& policy,
                     const ReferencePolicy& reference, const Prompt& prompt,
                     std::span<const TokenId> prefix);
// KL(p || q) over two full distributions.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// JSON checkpoint {spec_id, vocab_size, weights, meta} with 17-digit numbers.
std::string checkpoint_json(const std::string& spec_id, int vocab_size,
                            std::span<const double> weights, const std::string& meta_json = "{}");
void save_policy(const std::filesystem::path& path, const FeatureSpec& spec,
                 const PolicyParams& params, const std::string& meta_json = "{}");
struct Checkpoint {
  std::string spec_id;
  int vocab_size = 0;
  std::vector<double> weights;
  std::string meta_json;
};
Checkpoint parse_checkpoint(const std::string& text);
Checkpoint load_checkpoint(const std::filesystem::path& path);
PolicyParams load_policy(const std::filesystem::path& path, const FeatureSpec& spec);

}  // namespace tlab
