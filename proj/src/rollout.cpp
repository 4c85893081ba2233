#include <algorithm>
#include <array>
#include <bit>
#include <cmath>

#include "tlab/algos.hpp"
#include "tlab/error.hpp"
#include "tlab/parallel.hpp"
#include "tlab/rng.hpp"

namespace tlab {

std::string_view to_string(Algo a) {
  switch (a) {
    case Algo::ppo: return "ppo";
    case Algo::grpo: return "grpo";
    case Algo::mle: return "mle";
  }
  return "?";
}

std::string_view to_string(RmNorm n) { return n == RmNorm::none ? "none" : "whiten"; }

Algo parse_algo(std::string_view s) {
  if (s == "ppo") return Algo::ppo;
  if (s == "grpo") return Algo::grpo;
  if (s == "mle") return Algo::mle;
  throw ConfigError("algo: unknown value '" + std::string(s) + "' (ppo, grpo, mle)");
}

RmNorm parse_rm_norm(std::string_view s) {
  if (s == "none") return RmNorm::none;
  if (s == "whiten") return RmNorm::whiten;
  throw ConfigError("rm_norm: unknown value '" + std::string(s) + "' (none, whiten)");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (epochs < 0) fail("epochs: must be >= 0");
  if (batch_size < 0) fail("batch_size: must be >= 0");
  if (algo == Algo::grpo && group_size < 2) fail("group_size: G >= 2 is required for grpo");
  if (!(kl_beta >= 0) || !std::isfinite(kl_beta)) fail("kl_beta: must be finite and >= 0");
  if (!(adv_epsilon > 0) || !std::isfinite(adv_epsilon)) fail("adv_epsilon: must be > 0");
  if (!(clip_epsilon > 0 && clip_epsilon < 1)) fail("clip_epsilon: must lie in (0, 1)");
  if (!(gae_gamma >= 0 && gae_gamma <= 1)) fail("gae_gamma: must lie in [0, 1]");
  if (!(gae_lambda >= 0 && gae_lambda <= 1)) fail("gae_lambda: must lie in [0, 1]");
  if (!(lr_actor >= 0) || !std::isfinite(lr_actor)) fail("lr_actor: must be finite and >= 0");
  if (!(lr_critic >= 0) || !std::isfinite(lr_critic)) fail("lr_critic: must be finite and >= 0");
  if (ppo_passes < 1) fail("ppo_passes: must be >= 1");
  if (max_prompt_len < 1) fail("max_prompt_len: must be >= 1");
  if (max_resp_len < 2) fail("max_resp_len: must be >= 2");
  if (checkpoint_every < 1) fail("checkpoint_every: must be >= 1");
  if (ref_refresh < 0) fail("ref_refresh: must be >= 0");
  if (environment.empty()) fail("environment: must name a pool");
}

void RewardSource::check_pool(const PromptPool& pool) const {
  const bool has_model = model && featurizer;
  if (pool.kind == PoolKind::open && !has_model)
    throw ConfigError("pool '" + pool.name + "' is open-ended and needs a reward model");
  if (pool.kind == PoolKind::in_domain && !verifier)
    throw ConfigError("pool '" + pool.name + "' is verifiable and needs a verifier");
  if (pool.kind == PoolKind::mixed)
    for (const auto& p : pool.prompts) {
      if (p.kind == PromptKind::open && !has_model)
        throw ConfigError("prompt '" + p.id + "' is open-ended and needs a reward model");
      if (p.kind == PromptKind::verifiable && !verifier)
        throw ConfigError("prompt '" + p.id + "' is verifiable and needs a verifier");
    }
}

double RewardSource::operator()(const Prompt& prompt, std::span<const TokenId> response,
                                const Vocabulary& vocab) const {
  if (prompt.kind == PromptKind::verifiable) {
    if (!verifier) throw ConfigError("no verifier for prompt '" + prompt.id + "'");
    return verify(*verifier, *prompt.gold, response, vocab);
  }
  if (!model || !featurizer) throw ConfigError("no reward model for prompt '" + prompt.id + "'");
  return rm_score(*model, *featurizer, prompt, response);
}

std::string value_spec_id(const FeatureSpec& spec) { return "value1/" + spec.spec_id(); }

ValueParams zero_value(const FeatureSpec& spec) {
  return {value_spec_id(spec), std::vector<double>(kValueDim, 0.0)};
}

void value_features(const FeatureSpec& spec, const PromptContext& ctx, const StepState& s,
                    std::span<double> x) {
  std::fill(x.begin(), x.end(), 0.0);
  x[0] = 1.0;
  x[1 + static_cast<std::size_t>(ctx.domain)] = 1.0;
  x[6] = s.marker ? 1.0 : 0.0;
  x[7] = std::min(s.since_marker, 3) / 3.0;
  const int req = std::popcount(ctx.required);
  const int cov = std::popcount(ctx.required & s.covered);
  x[8] = req == 0 ? 1.0 : static_cast<double>(cov) / req;
  x[9] = cov == req ? 1.0 : 0.0;
  x[10] = static_cast<double>(s.length) / spec.max_response_len();
  x[11] = s.marker && s.answer_match > 0 ? 1.0 : 0.0;
  x[12] = s.marker && s.answer_match < 0 ? 1.0 : 0.0;
  x[13] = ctx.solution && s.marker &&
                  s.answer_match == static_cast<int>(ctx.solution->size())
              ? 1.0
              : 0.0;
  x[14] = s.sec_prev ? 1.0 : 0.0;
  x[15] = std::min(std::popcount(s.covered & ~ctx.required), 3) / 3.0;
}

std::vector<double> value_estimates(const FeatureSpec& spec, const ValueParams& critic,
                                    const PromptContext& ctx, std::span<const TokenId> response) {
  std::vector<double> out;
  out.reserve(response.size());
  std::array<double, kValueDim> x{};
  StepState s;
  for (auto tok : response) {
    value_features(spec, ctx, s, x);
    double v = 0;
    for (int i = 0; i < kValueDim; ++i) v += critic.weights[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
    out.push_back(v);
    spec.advance(ctx, s, tok);
  }
  return out;
}

namespace {

Rollout make_rollout(const FeatureSpec& spec, const PolicyParams& policy,
                     const ReferencePolicy* reference, const Prompt& prompt,
                     std::size_t prompt_index, const RewardSource& reward, std::uint64_t seed) {
  const auto ctx = spec.context(prompt);
  Rollout r;
  r.prompt_id = prompt.id;
  r.prompt_index = prompt_index;
  r.response = sample_response(spec, policy, ctx, seed);
  r.logprobs = step_logprobs(spec, policy, ctx, r.response);
  r.kl.assign(r.response.size(), 0.0);
  if (reference) {
    StepState s;
    for (std::size_t t = 0; t < r.response.size(); ++t) {
      r.kl[t] = exact_step_kl(spec, policy, *reference, ctx, s);
      spec.advance(ctx, s, r.response[t]);
    }
  }
  r.reward = reward(prompt, r.response, spec.vocab());
  if (!std::isfinite(r.reward))
    throw NumericError("non-finite reward for prompt '" + prompt.id + "'");
  return r;
}

void check_indices(const PromptPool& pool, std::span<const std::size_t> idx) {
  for (auto i : idx)
    if (i >= pool.size()) throw ConfigError("prompt index out of range for pool '" + pool.name + "'");
}

}  // namespace

std::vector<Rollout> collect_rollouts(const FeatureSpec& spec, const PolicyParams& policy,
                                      const ReferencePolicy& reference, const PromptPool& pool,
                                      std::span<const std::size_t> prompt_indices,
                                      const RewardSource& reward, std::uint64_t seed,
                                      const CollectOptions& opt) {
  check_compatible(spec, policy);
  reward.check_pool(pool);
  check_indices(pool, prompt_indices);
  std::vector<Rollout> out(prompt_indices.size());
  parallel_for(out.size(), opt.threads, [&](std::size_t i) {
    const auto& p = pool.prompts[prompt_indices[i]];
    const auto s = derive_seed(seed, {hash_string(p.id), opt.epoch, 0});
    out[i] = make_rollout(spec, policy, &reference, p, prompt_indices[i], reward, s);
  });
  return out;
}

std::vector<GroupRollout> collect_groups(const FeatureSpec& spec, const PolicyParams& policy,
                                         const PromptPool& pool,
                                         std::span<const std::size_t> prompt_indices,
                                         const RewardSource& reward, int group_size,
                                         std::uint64_t seed, const CollectOptions& opt) {
  check_compatible(spec, policy);
  reward.check_pool(pool);
  check_indices(pool, prompt_indices);
  if (group_size < 1) throw ConfigError("group_size: must be positive");
  const auto g = static_cast<std::size_t>(group_size);
  std::vector<Rollout> flat(prompt_indices.size() * g);
  parallel_for(flat.size(), opt.threads, [&](std::size_t k) {
    const auto pi = prompt_indices[k / g];
    const auto& p = pool.prompts[pi];
    const auto s = derive_seed(seed, {hash_string(p.id), opt.epoch, k % g});
    flat[k] = make_rollout(spec, policy, nullptr, p, pi, reward, s);
  });
  std::vector<GroupRollout> out(prompt_indices.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].prompt_index = prompt_indices[i];
    for (std::size_t j = 0; j < g; ++j) out[i].rollouts.push_back(std::move(flat[i * g + j]));
  }
  return out;
}

std::vector<double> grpo_advantages(std::span<const double> rewards, double eps) {
  if (rewards.size() < 2) throw ConfigError("group_size: G >= 2 is required for grpo");
  if (!(eps > 0)) throw ConfigError("adv_epsilon: must be > 0");
  const double n = static_cast<double>(rewards.size());
  double mean = 0;
  for (double r : rewards) mean += r;
  mean /= n;
  std::vector<double> centered(rewards.size());
  double var = 0;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    centered[i] = rewards[i] - mean;
    var += centered[i] * centered[i];
  }
  const double denom = std::sqrt(var / n) + eps;
  for (auto& c : centered) c /= denom;
  return centered;
}

void shape_rollout(const FeatureSpec& spec, const ValueParams& critic, const Prompt& prompt,
                   double beta, double gamma, double lambda, Rollout& r) {
  const auto n = r.response.size();
  if (r.kl.size() != n || r.logprobs.size() != n)
    throw DataError("rollout for '" + r.prompt_id + "' has inconsistent step vectors");
  const auto ctx = spec.context(prompt);
  r.shaped.assign(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) r.shaped[t] = (t + 1 == n ? r.reward : 0.0) - beta * r.kl[t];
  r.values = value_estimates(spec, critic, ctx, r.response);
  r.advantages.assign(n, 0.0);
  r.returns.assign(n, 0.0);
  double gae = 0, next_v = 0;
  for (std::size_t k = n; k-- > 0;) {
    const double delta = r.shaped[k] + gamma * next_v - r.values[k];
    gae = delta + gamma * lambda * gae;
    r.advantages[k] = gae;
    r.returns[k] = gae + r.values[k];
    next_v = r.values[k];
  }
}

}  // namespace tlab
