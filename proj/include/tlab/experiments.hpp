#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tlab/config.hpp"
#include "tlab/eval.hpp"

namespace tlab {

struct DriverOptions {
  std::filesystem::path out = "out";
  bool force = false;
  int threads = 1;
  std::ostream* progress = nullptr;  // wall-clock notes; never part of results
};

// What a driver leaves behind for one (experiment, seed).
struct RunRecord {
  std::string experiment;
  std::string kind;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::filesystem::path dir;
  std::vector<EvalReport> reports;  // first entry is the base report
  std::vector<std::string> checkpoints;  // relative to dir
  bool cached = false;
};

// Digest of the experiment config (minus the seed list) together with kind and seed.
std::string run_hash(const ExperimentSpec& spec, const std::string& kind, std::uint64_t seed);
std::filesystem::path run_dir(const DriverOptions& opt, const ExperimentSpec& spec,
                              const std::string& kind, std::uint64_t seed);

// Single training run of spec.train.
RunRecord run_train(const ExperimentSpec& spec, std::uint64_t seed, const DriverOptions& opt);
// Rows base / in-domain-PPO / open-GRPO / open-PPO under identical budgets.
RunRecord run_ablation(const ExperimentSpec& spec, std::uint64_t seed, const DriverOptions& opt);
// Rows base / stage1 / stage2 on the stage-2 benchmarks.
RunRecord run_two_stage(const ExperimentSpec& spec, std::uint64_t seed, const DriverOptions& opt);
// One row per size; training pools are nested prefixes.
RunRecord run_data_scaling(const ExperimentSpec& spec, std::uint64_t seed,
                           const DriverOptions& opt);
// One row per requested epoch, evaluated from saved checkpoints.
RunRecord run_epoch_sweep(const ExperimentSpec& spec, std::uint64_t seed,
                          const DriverOptions& opt);

using Driver = RunRecord (*)(const ExperimentSpec&, std::uint64_t, const DriverOptions&);
// Runs a driver for every seed and writes <experiment>/summary.csv with the
// per-system mean over seeds.
std::vector<RunRecord> run_all_seeds(Driver driver, const std::string& kind,
                                     const ExperimentSpec& spec, const DriverOptions& opt);

// system, one column per benchmark, average.
std::string comparison_table(const std::vector<EvalReport>& reports);
std::string reports_csv(const std::vector<EvalReport>& reports);
std::string reports_json(const std::vector<EvalReport>& reports);
std::vector<EvalReport> parse_reports_json(const std::string& text);
RunRecord load_run_record(const std::filesystem::path& dir);

}  // namespace tlab
