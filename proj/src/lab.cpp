#include "tlab/lab.hpp"

#include "tlab/error.hpp"
#include "tlab/preferences.hpp"
#include "tlab/rng.hpp"

namespace tlab {

RewardModelParams train_preference_model(const PromptPool& open, const RewardFeaturizer& f,
                                         int pairs, double lr, int steps, std::uint64_t seed,
                                         RmTrainReport* report) {
  const auto data = synth_preferences(open, f.vocab(), f.max_response_len(), pairs,
                                      derive_seed(seed, {hash_string("pairs")}));
  return rm_train(f, data, lr, steps, derive_seed(seed, {hash_string("fit")}), report);
}

namespace {

const ExperimentSpec& validated(const ExperimentSpec& spec) {
  spec.validate();
  return spec;
}

}  // namespace

Lab::Lab(const ExperimentSpec& spec, std::uint64_t seed, int threads)
    : spec_(validated(spec)),
      seed_(seed),
      threads_(threads),
      suite_(generate_task_suite(spec.corpus_seed, spec.counts, spec.vocab_size,
                                 spec.train.max_prompt_len)),
      fspec_(suite_.vocab, spec.train.max_resp_len),
      featurizer_(suite_.vocab, spec.train.max_resp_len) {
  // Training reward model and judge are fitted on separately seeded preference draws.
  rm_ = train_preference_model(suite_.open, featurizer_, spec.pref_pairs, spec.rm_lr,
                               spec.rm_steps, derive_seed(seed, {hash_string("reward-model")}),
                               &rm_report_);
  judge_ = train_preference_model(suite_.open, featurizer_, spec.pref_pairs, spec.rm_lr,
                                  spec.rm_steps, derive_seed(seed, {hash_string("judge")}));
  base_ = spec.base_checkpoint.empty()
              ? init_policy(fspec_, derive_seed(seed, {hash_string("init")}), spec.init)
              : load_policy(spec.base_checkpoint, fspec_);

  for (const auto& [name, pool] : suite_.benchmarks) {
    Benchmark b;
    b.name = name;
    b.pool = pool;
    b.decode_seed = derive_seed(seed, {hash_string("decode"), hash_string(name)});
    if (pool.kind == PoolKind::open) {
      JudgeProtocol j{&judge_, &featurizer_, {}};
      for (const auto& p : pool.prompts)
        j.baseline.push_back(reference_response(suite_.vocab, spec.train.max_resp_len, p));
      b.judge = std::move(j);
    } else {
      b.verifier = VerifierKind::exact();
    }
    benchmarks_.emplace(name, std::move(b));
  }
}

const PromptPool& Lab::pool(const std::string& environment) const {
  if (environment == "open") return suite_.open;
  if (environment == "in_domain") return suite_.in_domain;
  if (environment == "transduce") return suite_.transduce;
  throw ConfigError("environment: unknown pool '" + environment + "'");
}

RewardSource Lab::reward_for(const std::string& environment) const {
  if (pool(environment).kind == PoolKind::open) return RewardSource::from_model(rm_, featurizer_);
  return RewardSource::from_verifier(VerifierKind::exact());
}

const Benchmark& Lab::benchmark(const std::string& name) const {
  auto it = benchmarks_.find(name);
  if (it == benchmarks_.end()) throw ConfigError("benchmarks: unknown benchmark '" + name + "'");
  if (it->second.pool.empty()) throw DataError("benchmark '" + name + "' has an empty pool");
  return it->second;
}

TrainConfig Lab::train_config(const TrainConfig& base, const std::string& cell) const {
  TrainConfig c = base;
  c.seed = derive_seed(seed_, {hash_string("train"), hash_string(cell)});
  return c;
}

EvalSnapshot Lab::snapshot(const PolicyParams& policy,
                           const std::vector<std::string>& names) const {
  EvalSnapshot s;
  for (const auto& n : names)
    s.scores.emplace_back(n, run_benchmark(fspec_, policy, benchmark(n), threads_).score);
  return s;
}

SystemScores Lab::scores(const std::string& system, const PolicyParams& policy,
                         const std::vector<std::string>& names) const {
  SystemScores s;
  s.system = system;
  for (const auto& n : names) {
    const auto r = run_benchmark(fspec_, policy, benchmark(n), threads_);
    s.scores.emplace_back(n, r.score);
    s.mean_lens.push_back(length_stats(r.lengths).mean);
  }
  return s;
}

}  // namespace tlab
