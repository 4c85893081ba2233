#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tlab/policy.hpp"
#include "tlab/reward_model.hpp"
#include "tlab/verifier.hpp"

namespace tlab {

enum class Algo { ppo, grpo, mle };
enum class RmNorm { none, whiten };

std::string_view to_string(Algo a);
std::string_view to_string(RmNorm n);
Algo parse_algo(std::string_view s);
RmNorm parse_rm_norm(std::string_view s);

struct TrainConfig {
  Algo algo = Algo::ppo;
  std::string environment = "open";  // open | in_domain | transduce
  int epochs = 15;
  double lr_actor = 0.05;
  double lr_critic = 0.5;
  int batch_size = 64;
  int group_size = 4;
  double kl_beta = 0.05;
  double clip_epsilon = 0.2;
  double adv_epsilon = 1e-8;
  double gae_gamma = 1.0;
  double gae_lambda = 0.95;
  int ppo_passes = 1;
  int max_prompt_len = kDefaultMaxPromptLen;
  int max_resp_len = 32;
  std::uint64_t seed = 0;
  RmNorm rm_norm = RmNorm::none;
  int checkpoint_every = 5;
  int ref_refresh = 0;  // re-snapshot the reference every N epochs; 0 = never

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// Scores a response with a verifier (verifiable prompts) or a reward model
// (open prompts).
struct RewardSource {
  std::optional<VerifierKind> verifier;
  const RewardModelParams* model = nullptr;
  const RewardFeaturizer* featurizer = nullptr;

  static RewardSource from_verifier(VerifierKind k) { return {k, nullptr, nullptr}; }
  static RewardSource from_model(const RewardModelParams& m, const RewardFeaturizer& f) {
    return {std::nullopt, &m, &f};
  }
  // Throws ConfigError when the source cannot score every prompt of the pool.
  void check_pool(const PromptPool& pool) const;
  double operator()(const Prompt& prompt, std::span<const TokenId> response,
                    const Vocabulary& vocab) const;
};

struct Rollout {
  std::string prompt_id;
  std::size_t prompt_index = 0;
  TokenSeq response;
  std::vector<double> logprobs;  // behavior policy, per step
  std::vector<double> kl;        // exact step KL vs the reference
  double reward = 0;
  std::vector<double> shaped;
  std::vector<double> values;
  std::vector<double> advantages;
  std::vector<double> returns;
};

struct GroupRollout {
  std::size_t prompt_index = 0;
  std::vector<Rollout> rollouts;
  std::vector<double> advantages;
};

// Linear critic over prefix summary features.
struct ValueParams {
  std::string spec_id;
  std::vector<double> weights;

  bool operator==(const ValueParams&) const = default;
};

inline constexpr int kValueDim = 16;
std::string value_spec_id(const FeatureSpec& spec);
ValueParams zero_value(const FeatureSpec& spec);
void value_features(const FeatureSpec& spec, const PromptContext& ctx, const StepState& state,
                    std::span<double> out);
// Critic estimate before every response token.
std::vector<double> value_estimates(const FeatureSpec& spec, const ValueParams& critic,
                                    const PromptContext& ctx, std::span<const TokenId> response);

struct CollectOptions {
  int threads = 1;
  std::uint64_t epoch = 0;
};

// Samples one response per listed prompt (collect_groups: group_size per
// mode). Rollout i of prompt p uses derive_seed(seed, hash(id), epoch, i).
std::vector<Rollout> collect_rollouts(const FeatureSpec& spec, const PolicyParams& policy,
                                      const ReferencePolicy& reference, const PromptPool& pool,
                                      std::span<const std::size_t> prompt_indices,
                                      const RewardSource& reward, std::uint64_t seed,
                                      const CollectOptions& opt = {});
std::vector<GroupRollout> collect_groups(const FeatureSpec& spec, const PolicyParams& policy,
                                         const PromptPool& pool,
                                         std::span<const std::size_t> prompt_indices,
                                         const RewardSource& reward, int group_size,
                                         std::uint64_t seed, const CollectOptions& opt = {});

std::vector<double> grpo_advantages(std::span<const double> rewards, double eps);

// Fills shaped rewards (terminal reward minus beta * KL), critic values,
// GAE advantages and returns.
void shape_rollout(const FeatureSpec& spec, const ValueParams& critic, const Prompt& prompt,
                   double beta, double gamma, double lambda, Rollout& r);

struct UpdateStats {
  double mean_reward = 0;
  double mean_kl = 0;
  double clip_frac = 0;
  double mean_len = 0;
  double max_ratio_dev = 0;  // max |ratio - 1| seen on the first pass
};

// Rollouts must already carry advantages and returns (see shape_rollout).
UpdateStats ppo_update(const FeatureSpec& spec, PolicyParams& policy, ValueParams& critic,
                       const PromptPool& pool, std::span<const Rollout> rollouts,
                       const TrainConfig& cfg, int threads = 1);
UpdateStats grpo_update(const FeatureSpec& spec, PolicyParams& policy, const PromptPool& pool,
                        std::span<const GroupRollout> groups, const TrainConfig& cfg,
                        int threads = 1);

struct SupervisedPair {
  Prompt prompt;
  TokenSeq gold;
};

// Mean sequence log-likelihood of the gold responses and its gradient.
double mle_objective(const FeatureSpec& spec, const PolicyParams& policy,
                     std::span<const SupervisedPair> data, std::vector<double>* grad = nullptr);
PolicyParams mle_update(const FeatureSpec& spec, const PolicyParams& policy,
                        std::span<const SupervisedPair> data, double lr, int steps,
                        std::uint64_t seed, int batch_size = 0);

struct EvalSnapshot {
  std::vector<std::pair<std::string, double>> scores;  // benchmark -> percent
};

struct EpochRecord {
  int epoch = 0;
  std::string algo;
  std::string stage;
  double mean_reward = 0;
  double mean_kl = 0;
  double mean_resp_len = 0;
  double clip_frac = 0;
  std::optional<EvalSnapshot> eval;
};

std::string to_jsonl(const EpochRecord& r);

struct TrainHooks {
  // Called on every checkpoint epoch (and the final one) with the current
  // policy; the result is embedded in the epoch record.
  std::function<EvalSnapshot(const PolicyParams&)> evaluate;
  // Called after every epoch, including epoch 0 (before training).
  std::function<void(int epoch, const PolicyParams&)> on_epoch;
  int threads = 1;
};

struct RunResult {
  PolicyParams policy;
  std::vector<EpochRecord> log;
};

RunResult train_run(const FeatureSpec& spec, const PolicyParams& init, const PromptPool& pool,
                    const RewardSource& reward, const TrainConfig& cfg,
                    const TrainHooks& hooks = {}, std::string_view stage = "");

struct TwoStageResult {
  PolicyParams stage1;
  PolicyParams stage2;
  std::vector<EpochRecord> log;
};

TwoStageResult two_stage_run(const FeatureSpec& spec, const PolicyParams& init,
                             const PromptPool& pool1, const RewardSource& reward1,
                             const TrainConfig& cfg1, const PromptPool& pool2,
                             const RewardSource& reward2, const TrainConfig& cfg2,
                             const TrainHooks& hooks = {});

}  // namespace tlab
