#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tlab/algos.hpp"
#include "tlab/corpus.hpp"

namespace tlab {

// Everything an experiment needs; parsed from a flat JSON object.
struct ExperimentSpec {
  std::string name = "default";
  TrainConfig train;  // seed is filled per run seed
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<std::string> benchmarks{"open-quality", "arith-hard", "transduce"};

  std::uint64_t corpus_seed = 7;
  int vocab_size = 64;
  TaskCounts counts;

  int pref_pairs = 2000;
  double rm_lr = 0.1;
  int rm_steps = 500;

  InitOptions init;
  std::string base_checkpoint;  // empty: seeded initialization

  // Second stage of the two-stage pipeline.
  Algo stage2_algo = Algo::grpo;
  std::string stage2_environment = "in_domain";
  int stage2_epochs = 10;
  double stage2_lr_actor = 0.1;
  int stage2_batch_size = 64;
  int stage2_group_size = 4;
  std::vector<std::string> stage2_benchmarks{"arith-comp", "arith-hard"};

  std::vector<int> sizes{0, 25, 50, 100, 200};
  std::vector<int> eval_epochs{0, 5, 10, 15};
  int pass_n = 16;
  std::vector<int> pass_ks{1, 4, 8, 16};

  // Throws ConfigError naming the offending key.
  void validate() const;
  TrainConfig stage2_config() const;
};

ExperimentSpec default_spec();
// Strict: unknown keys and type mismatches are errors naming the key.
ExperimentSpec parse_config(const nlohmann::json& j);
ExperimentSpec load_config(const std::filesystem::path& path);
// Canonical dump with every default filled in; keys sorted.
nlohmann::json to_json(const ExperimentSpec& spec);
std::string canonical_config(const ExperimentSpec& spec);
// FNV-1a over the canonical dump, as 16 hex digits.
std::string config_hash(const ExperimentSpec& spec);

}  // namespace tlab
