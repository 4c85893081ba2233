#include <cmath>
#include <numeric>
#include <sstream>

#include "tlab/algos.hpp"
#include "tlab/error.hpp"
#include "tlab/io.hpp"
#include "tlab/rng.hpp"

namespace tlab {

std::string to_jsonl(const EpochRecord& r) {
  std::ostringstream o;
  o << "{\"epoch\":" << r.epoch << ",\"algo\":\"" << r.algo << "\"";
  if (!r.stage.empty()) o << ",\"stage\":\"" << r.stage << "\"";
  o << ",\"mean_reward\":" << format_double(r.mean_reward)
    << ",\"mean_kl\":" << format_double(r.mean_kl)
    << ",\"mean_resp_len\":" << format_double(r.mean_resp_len)
    << ",\"clip_frac\":" << format_double(r.clip_frac);
  if (r.eval) {
    o << ",\"eval\":{";
    bool first = true;
    for (const auto& [name, score] : r.eval->scores) {
      o << (first ? "" : ",") << '"' << name << "\":" << format_double(score);
      first = false;
    }
    o << '}';
  }
  o << '}';
  return o.str();
}

namespace {

// Running mean/variance over every reward-model score seen so far.
struct Whitener {
  double count = 0, mean = 0, m2 = 0;
  void add(double x) {
    count += 1;
    const double d = x - mean;
    mean += d / count;
    m2 += d * (x - mean);
  }
  double apply(double x) const {
    const double sd = count > 1 ? std::sqrt(m2 / count) : 0.0;
    return (x - mean) / (sd + 1e-8);
  }
};

std::vector<SupervisedPair> gold_pairs(const PromptPool& pool, std::span<const std::size_t> idx) {
  std::vector<SupervisedPair> out;
  for (auto i : idx) {
    const auto& p = pool.prompts[i];
    if (!p.gold) throw ConfigError("mle needs gold answers; prompt '" + p.id + "' has none");
    TokenSeq g{kAnswerMarker};
    g.insert(g.end(), p.gold->begin(), p.gold->end());
    g.push_back(kEos);
    out.push_back({p, std::move(g)});
  }
  return out;
}

struct EpochAccum {
  double weight = 0, reward = 0, kl = 0, len = 0, clip = 0;
  void add(const UpdateStats& s, double w) {
    weight += w;
    reward += w * s.mean_reward;
    kl += w * s.mean_kl;
    len += w * s.mean_len;
    clip += w * s.clip_frac;
  }
};

}  // namespace

RunResult train_run(const FeatureSpec& spec, const PolicyParams& init, const PromptPool& pool,
                    const RewardSource& reward, const TrainConfig& cfg, const TrainHooks& hooks,
                    std::string_view stage) {
  cfg.validate();
  check_compatible(spec, init);
  if (cfg.max_resp_len != spec.max_response_len())
    throw ConfigError("max_resp_len: config says " + std::to_string(cfg.max_resp_len) +
                      " but the feature spec uses " + std::to_string(spec.max_response_len()));
  if (cfg.algo != Algo::mle) reward.check_pool(pool);
  if (pool.empty() && cfg.batch_size > 0 && cfg.epochs > 0)
    throw DataError("training pool '" + pool.name + "' is empty");

  RunResult res{init, {}};
  auto& policy = res.policy;
  auto reference = ReferencePolicy::snapshot(init);
  auto critic = zero_value(spec);
  Whitener whiten;
  if (hooks.on_epoch) hooks.on_epoch(0, policy);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const std::string where = "epoch " + std::to_string(epoch) +
                              (stage.empty() ? "" : " of " + std::string(stage)) + ": ";
    try {
      if (cfg.ref_refresh > 0 && epoch > 1 && (epoch - 1) % cfg.ref_refresh == 0)
        reference = ReferencePolicy::snapshot(policy);
      std::vector<std::size_t> order(pool.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng rng(derive_seed(cfg.seed, {hash_string("order"), static_cast<std::uint64_t>(epoch)}));
      rng.shuffle(order.begin(), order.end());

      EpochAccum acc;
      const auto bs = static_cast<std::size_t>(cfg.batch_size);
      for (std::size_t start = 0; bs > 0 && start < order.size(); start += bs) {
        const std::span<const std::size_t> idx(order.data() + start,
                                               std::min(bs, order.size() - start));
        const CollectOptions copt{hooks.threads, static_cast<std::uint64_t>(epoch)};
        if (cfg.algo == Algo::ppo) {
          auto rollouts = collect_rollouts(spec, policy, reference, pool, idx, reward, cfg.seed, copt);
          std::vector<double> raw;
          for (auto& r : rollouts) {
            raw.push_back(r.reward);
            if (cfg.rm_norm == RmNorm::whiten && pool.prompts[r.prompt_index].kind == PromptKind::open)
              whiten.add(r.reward);
          }
          for (auto& r : rollouts) {
            if (cfg.rm_norm == RmNorm::whiten && pool.prompts[r.prompt_index].kind == PromptKind::open)
              r.reward = whiten.apply(r.reward);
            shape_rollout(spec, critic, pool.prompts[r.prompt_index], cfg.kl_beta, cfg.gae_gamma,
                          cfg.gae_lambda, r);
          }
          auto st = ppo_update(spec, policy, critic, pool, rollouts, cfg, hooks.threads);
          st.mean_reward = std::accumulate(raw.begin(), raw.end(), 0.0) / static_cast<double>(raw.size());
          acc.add(st, static_cast<double>(idx.size()));
        } else if (cfg.algo == Algo::grpo) {
          auto groups = collect_groups(spec, policy, pool, idx, reward, cfg.group_size, cfg.seed, copt);
          for (auto& g : groups) {
            std::vector<double> rw;
            for (const auto& r : g.rollouts) rw.push_back(r.reward);
            g.advantages = grpo_advantages(rw, cfg.adv_epsilon);
          }
          // KL to the reference is logged for monitoring only.
          for (auto& g : groups)
            for (auto& r : g.rollouts) {
              const auto ctx = spec.context(pool.prompts[g.prompt_index]);
              StepState s;
              for (std::size_t t = 0; t < r.response.size(); ++t) {
                r.kl[t] = exact_step_kl(spec, policy, reference, ctx, s);
                spec.advance(ctx, s, r.response[t]);
              }
            }
          acc.add(grpo_update(spec, policy, pool, groups, cfg, hooks.threads),
                  static_cast<double>(idx.size()));
        } else {
          const auto data = gold_pairs(pool, idx);
          UpdateStats st;
          st.mean_reward = mle_objective(spec, policy, data);
          for (const auto& d : data) st.mean_len += static_cast<double>(d.gold.size()) / static_cast<double>(data.size());
          policy = mle_update(spec, policy, data, cfg.lr_actor, 1, 0);
          acc.add(st, static_cast<double>(idx.size()));
        }
      }

      EpochRecord rec;
      rec.epoch = epoch;
      rec.algo = std::string(to_string(cfg.algo));
      rec.stage = std::string(stage);
      if (acc.weight > 0) {
        rec.mean_reward = acc.reward / acc.weight;
        rec.mean_kl = acc.kl / acc.weight;
        rec.mean_resp_len = acc.len / acc.weight;
        rec.clip_frac = acc.clip / acc.weight;
      }
      if (hooks.evaluate && (epoch % cfg.checkpoint_every == 0 || epoch == cfg.epochs))
        rec.eval = hooks.evaluate(policy);
      res.log.push_back(std::move(rec));
      if (hooks.on_epoch) hooks.on_epoch(epoch, policy);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    } catch (const NumericError& e) {
      throw NumericError(where + e.what());
    }
  }
  return res;
}

TwoStageResult two_stage_run(const FeatureSpec& spec, const PolicyParams& init,
                             const PromptPool& pool1, const RewardSource& reward1,
                             const TrainConfig& cfg1, const PromptPool& pool2,
                             const RewardSource& reward2, const TrainConfig& cfg2,
                             const TrainHooks& hooks) {
  TwoStageResult out;
  auto r1 = train_run(spec, init, pool1, reward1, cfg1, hooks, "stage1");
  TrainHooks h2 = hooks;
  h2.on_epoch = nullptr;  // epoch 0 of stage 2 is the stage-1 policy
  if (hooks.on_epoch)
    h2.on_epoch = [&](int e, const PolicyParams& p) {
      if (e > 0) hooks.on_epoch(cfg1.epochs + e, p);
    };
  auto r2 = train_run(spec, r1.policy, pool2, reward2, cfg2, h2, "stage2");
  out.stage1 = std::move(r1.policy);
  out.stage2 = std::move(r2.policy);
  out.log = std::move(r1.log);
  out.log.insert(out.log.end(), r2.log.begin(), r2.log.end());
  return out;
}

}  // namespace tlab
