#include <array>
#include <cmath>

#include "tlab/algos.hpp"
#include "tlab/error.hpp"
#include "tlab/parallel.hpp"
#include "tlab/rng.hpp"

namespace tlab {

namespace {

void check_finite(std::span<const double> g, const std::string& rollout_id) {
  for (double x : g)
    if (!std::isfinite(x))
      throw NumericError("non-finite gradient from rollout '" + rollout_id + "'");
}

// Sums per-item gradients in index order so the result does not depend on
// the worker count.
template <typename Fn>
std::vector<double> reduce_gradients(std::size_t items, std::size_t dim, int threads, Fn&& fn) {
  std::vector<std::vector<double>> parts(items);
  parallel_for(items, threads, [&](std::size_t i) {
    parts[i].assign(dim, 0.0);
    fn(i, parts[i]);
  });
  std::vector<double> total(dim, 0.0);
  for (const auto& p : parts)
    for (std::size_t j = 0; j < dim; ++j) total[j] += p[j];
  return total;
}

}  // namespace

UpdateStats ppo_update(const FeatureSpec& spec, PolicyParams& policy, ValueParams& critic,
                       const PromptPool& pool, std::span<const Rollout> rollouts,
                       const TrainConfig& cfg, int threads) {
  check_compatible(spec, policy);
  if (critic.spec_id != value_spec_id(spec) || critic.weights.size() != kValueDim)
    throw ConfigError("critic does not match feature spec " + spec.spec_id());
  UpdateStats st;
  if (rollouts.empty()) return st;
  const auto dim = static_cast<std::size_t>(spec.total_dim());
  const double n = static_cast<double>(rollouts.size());
  for (const auto& r : rollouts) {
    if (r.prompt_index >= pool.size()) throw ConfigError("rollout prompt index out of range");
    if (r.advantages.size() != r.response.size() || r.returns.size() != r.response.size())
      throw DataError("rollout '" + r.prompt_id + "' has no advantages; shape it first");
    st.mean_reward += r.reward / n;
    double kl = 0;
    for (double k : r.kl) kl += k;
    st.mean_kl += kl / n;
    st.mean_len += static_cast<double>(r.response.size()) / n;
  }

  // Critic step uses the values the advantages were computed with.
  std::array<double, kValueDim> cgrad{};
  {
    std::array<double, kValueDim> x{};
    double tokens = 0;
    for (const auto& r : rollouts) {
      const auto ctx = spec.context(pool.prompts[r.prompt_index]);
      StepState s;
      for (std::size_t t = 0; t < r.response.size(); ++t) {
        value_features(spec, ctx, s, x);
        const double err = r.values[t] - r.returns[t];
        for (int i = 0; i < kValueDim; ++i) cgrad[static_cast<std::size_t>(i)] += err * x[static_cast<std::size_t>(i)];
        spec.advance(ctx, s, r.response[t]);
        tokens += 1;
      }
    }
    for (auto& g : cgrad) g /= tokens;
  }

  double clipped = 0, tokens = 0;
  for (int pass = 0; pass < cfg.ppo_passes; ++pass) {
    std::vector<double> clip_count(rollouts.size(), 0.0), ratio_dev(rollouts.size(), 0.0);
    auto grad = reduce_gradients(rollouts.size(), dim, threads, [&](std::size_t i, std::vector<double>& g) {
      const auto& r = rollouts[i];
      const auto ctx = spec.context(pool.prompts[r.prompt_index]);
      const auto now = step_logprobs(spec, policy, ctx, r.response);
      std::vector<double> w(r.response.size(), 0.0);
      for (std::size_t t = 0; t < w.size(); ++t) {
        const double ratio = std::exp(now[t] - r.logprobs[t]);
        const double a = r.advantages[t];
        ratio_dev[i] = std::max(ratio_dev[i], std::abs(ratio - 1.0));
        const bool clip = (a > 0 && ratio > 1 + cfg.clip_epsilon) ||
                          (a < 0 && ratio < 1 - cfg.clip_epsilon);
        if (clip)
          clip_count[i] += 1;
        else
          w[t] = ratio * a;
      }
      accumulate_logprob_gradient(spec, policy, ctx, r.response, w, g);
      check_finite(g, r.prompt_id);
    });
    for (std::size_t i = 0; i < rollouts.size(); ++i) {
      clipped += clip_count[i];
      tokens += static_cast<double>(rollouts[i].response.size());
      if (pass == 0) st.max_ratio_dev = std::max(st.max_ratio_dev, ratio_dev[i]);
    }
    for (std::size_t j = 0; j < dim; ++j) policy.weights[j] += cfg.lr_actor * grad[j] / n;
  }
  st.clip_frac = tokens > 0 ? clipped / tokens : 0.0;
  for (int i = 0; i < kValueDim; ++i)
    critic.weights[static_cast<std::size_t>(i)] -= cfg.lr_critic * cgrad[static_cast<std::size_t>(i)];
  for (double w : critic.weights)
    if (!std::isfinite(w)) throw NumericError("critic weights became non-finite");
  return st;
}

UpdateStats grpo_update(const FeatureSpec& spec, PolicyParams& policy, const PromptPool& pool,
                        std::span<const GroupRollout> groups, const TrainConfig& cfg,
                        int threads) {
  check_compatible(spec, policy);
  UpdateStats st;
  if (groups.empty()) return st;
  const auto dim = static_cast<std::size_t>(spec.total_dim());
  double count = 0;
  for (const auto& g : groups) {
    if (g.advantages.size() != g.rollouts.size() || g.rollouts.size() < 2)
      throw DataError("group rollout without matching advantages");
    for (const auto& r : g.rollouts) {
      st.mean_reward += r.reward;
      for (double k : r.kl) st.mean_kl += k;
      st.mean_len += static_cast<double>(r.response.size());
      count += 1;
    }
  }
  st.mean_reward /= count;
  st.mean_kl /= count;
  st.mean_len /= count;

  auto grad = reduce_gradients(groups.size(), dim, threads, [&](std::size_t i, std::vector<double>& g) {
    const auto& grp = groups[i];
    const auto ctx = spec.context(pool.prompts.at(grp.prompt_index));
    const double inv_g = 1.0 / static_cast<double>(grp.rollouts.size());
    for (std::size_t j = 0; j < grp.rollouts.size(); ++j) {
      const double a = grp.advantages[j] * inv_g;
      if (a == 0.0) continue;
      const auto& r = grp.rollouts[j];
      std::vector<double> w(r.response.size(), a);
      accumulate_logprob_gradient(spec, policy, ctx, r.response, w, g);
      check_finite(g, r.prompt_id);
    }
  });
  const double b = static_cast<double>(groups.size());
  for (std::size_t j = 0; j < dim; ++j) policy.weights[j] += cfg.lr_actor * grad[j] / b;
  return st;
}

double mle_objective(const FeatureSpec& spec, const PolicyParams& policy,
                     std::span<const SupervisedPair> data, std::vector<double>* grad) {
  check_compatible(spec, policy);
  if (data.empty()) throw ConfigError("supervised data is empty");
  const double n = static_cast<double>(data.size());
  if (grad) grad->assign(static_cast<std::size_t>(spec.total_dim()), 0.0);
  double total = 0;
  for (const auto& d : data) {
    const auto ctx = spec.context(d.prompt);
    total += sequence_logprob(spec, policy, ctx, d.gold);
    if (grad) accumulate_logprob_gradient(spec, policy, ctx, d.gold, {}, *grad);
  }
  if (grad) {
    for (auto& g : *grad) g /= n;
    check_finite(*grad, data.front().prompt.id);
  }
  return total / n;
}

PolicyParams mle_update(const FeatureSpec& spec, const PolicyParams& policy,
                        std::span<const SupervisedPair> data, double lr, int steps,
                        std::uint64_t seed, int batch_size) {
  check_compatible(spec, policy);
  if (steps < 0) throw ConfigError("steps: must be >= 0");
  for (const auto& d : data) {
    try {
      check_response(spec, d.gold);
    } catch (const DataError& e) {
      throw DataError("gold response for '" + d.prompt.id + "': " + e.what());
    }
  }
  PolicyParams out = policy;
  if (steps == 0) return out;
  if (data.empty()) throw ConfigError("supervised data is empty");
  Rng rng(seed);
  std::vector<double> grad;
  std::vector<SupervisedPair> batch;
  for (int s = 0; s < steps; ++s) {
    std::span<const SupervisedPair> use = data;
    if (batch_size > 0 && static_cast<std::size_t>(batch_size) < data.size()) {
      batch.clear();
      for (int b = 0; b < batch_size; ++b) batch.push_back(data[rng.below(data.size())]);
      use = batch;
    }
    mle_objective(spec, out, use, &grad);
    for (std::size_t j = 0; j < grad.size(); ++j) out.weights[j] += lr * grad[j];
  }
  return out;
}

}  // namespace tlab
