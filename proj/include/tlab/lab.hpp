#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tlab/algos.hpp"
#include "tlab/config.hpp"
#include "tlab/eval.hpp"

namespace tlab {

// Per-seed world: corpus, reward model, judge, base policy and benchmarks.
// The corpus depends on corpus_seed only; everything else on the run seed.
class Lab {
 public:
  Lab(const ExperimentSpec& spec, std::uint64_t seed, int threads = 1);
  Lab(const Lab&) = delete;
  Lab& operator=(const Lab&) = delete;

  const ExperimentSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  int threads() const { return threads_; }
  const TaskSuite& suite() const { return suite_; }
  const FeatureSpec& features() const { return fspec_; }
  const RewardFeaturizer& featurizer() const { return featurizer_; }
  const RewardModelParams& reward_model() const { return rm_; }
  const RewardModelParams& judge() const { return judge_; }
  const RmTrainReport& reward_model_report() const { return rm_report_; }
  const PolicyParams& base() const { return base_; }

  const PromptPool& pool(const std::string& environment) const;
  RewardSource reward_for(const std::string& environment) const;
  const Benchmark& benchmark(const std::string& name) const;

  // Train config for this seed; `cell` separates the derived run seeds of
  // cells that share a Lab.
  TrainConfig train_config(const TrainConfig& base, const std::string& cell) const;

  EvalSnapshot snapshot(const PolicyParams& policy, const std::vector<std::string>& names) const;
  SystemScores scores(const std::string& system, const PolicyParams& policy,
                      const std::vector<std::string>& names) const;

 private:
  ExperimentSpec spec_;
  std::uint64_t seed_;
  int threads_;
  TaskSuite suite_;
  FeatureSpec fspec_;
  RewardFeaturizer featurizer_;
  RewardModelParams rm_, judge_;
  RmTrainReport rm_report_;
  PolicyParams base_;
  std::map<std::string, Benchmark> benchmarks_;
};

// Reward model trained on rubric preferences from an open pool.
RewardModelParams train_preference_model(const PromptPool& open, const RewardFeaturizer& f,
                                         int pairs, double lr, int steps, std::uint64_t seed,
                                         RmTrainReport* report = nullptr);

}  // namespace tlab
