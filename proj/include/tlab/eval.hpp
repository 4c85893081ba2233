#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tlab/policy.hpp"
#include "tlab/reward_model.hpp"
#include "tlab/verifier.hpp"

namespace tlab {

// Judged benchmarks compare greedy outputs against fixed baseline responses
// with a reward model that plays the judge.
struct JudgeProtocol {
  const RewardModelParams* judge = nullptr;
  const RewardFeaturizer* featurizer = nullptr;
  std::vector<TokenSeq> baseline;  // one per pool prompt
};

struct Benchmark {
  std::string name;
  PromptPool pool;
  std::optional<VerifierKind> verifier;
  std::optional<JudgeProtocol> judge;
  int samples_per_prompt = 1;
  std::uint64_t decode_seed = 0;
};

struct PromptOutcome {
  std::string prompt_id;
  TokenSeq response;
  double passed = 0;  // verifier reward, or judged preference probability
};

struct BenchmarkResult {
  std::string name;
  double score = 0;  // percent
  std::vector<int> lengths;
  std::vector<PromptOutcome> outcomes;
  bool fallback = false;  // judged score fell back to the raw win rate
};

BenchmarkResult run_benchmark(const FeatureSpec& spec, const PolicyParams& policy,
                              const Benchmark& bench, int threads = 1);

// 1 - C(n-c, k) / C(n, k).
double pass_at_k(int n, int c, int k);

struct PassKCurve {
  std::vector<std::pair<int, int>> tallies;  // (n, c) per prompt
  std::vector<int> ks;
  std::vector<double> estimates;
};

PassKCurve pass_k_curve(const FeatureSpec& spec, const PolicyParams& policy,
                        const Benchmark& bench, int n, std::span<const int> ks, int threads = 1);
PassKCurve pass_k_from_tallies(std::vector<std::pair<int, int>> tallies, std::span<const int> ks);
std::string pass_k_csv(const PassKCurve& curve);

struct LengthStats {
  double mean = 0;
  double median = 0;
  double p90 = 0;
};

LengthStats length_stats(std::span<const int> lengths);

// One judged comparison. The label is the probability that the judge prefers
// the candidate, in [0, 1]; 0.5 on a tie.
struct Comparison {
  double label = 0.5;
  double score_diff = 0;   // judge content score, candidate minus baseline
  double length_diff = 0;  // tokens, candidate minus baseline
};

struct WinRate {
  double percent = 50.0;
  bool fallback = false;
};

WinRate lc_win_rate(std::span<const Comparison> comparisons);
WinRate lc_win_rate(std::span<const Prompt> prompts, std::span<const TokenSeq> candidate,
                    std::span<const TokenSeq> baseline, const RewardModelParams& judge,
                    const RewardFeaturizer& featurizer);

struct ReportRow {
  std::string benchmark;
  double score = 0;
  double delta = 0;
  double mean_len = 0;
};

struct EvalReport {
  std::string system;
  std::vector<ReportRow> rows;
  double average = 0;
  double average_delta = 0;
};

struct SystemScores {
  std::string system;
  std::vector<std::pair<std::string, double>> scores;
  std::vector<double> mean_lens;  // optional, parallel to scores
};

EvalReport aggregate_report(const SystemScores& system, const SystemScores& base);

// One-decimal display used by every table.
std::string display1(double v);
std::string display_delta(double v);

std::string report_csv(const EvalReport& r);
std::string report_json(const EvalReport& r);
EvalReport parse_report_json(const std::string& text);

}  // namespace tlab
