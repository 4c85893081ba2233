#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tlab/corpus.hpp"

namespace tlab {

// Response-level features scored by the linear preference model. Task-answer
// correctness is deliberately absent.
enum class RmFeature : int {
  aspects_covered,
  aspects_missing,
  aspects_extraneous,
  marker_once,
  marker_disciplined,
  terminated,
  sections,
  sections_with_aspect,
  len_le4,
  len_le8,
  len_le16,
  len_le24,
  len_gt24,
  count
};
inline constexpr int kRmDim = static_cast<int>(RmFeature::count);
inline constexpr int kRmLengthFirst = static_cast<int>(RmFeature::len_le4);
using RmFeatures = std::array<double, kRmDim>;

std::string_view rm_feature_name(int index);

// Structural facts about a response to an open prompt. Shared by the reward
// features and the preference rubric.
struct ResponseShape {
  int length = 0;
  bool terminated = false;  // voluntary <eos> below the length cap
  int markers = 0;
  bool disciplined = false;  // one marker, 1-3 plain tail tokens, terminated
  int covered = 0;
  int missing = 0;
  int extraneous = 0;
  int sections = 0;
  int sections_with_aspect = 0;
};

ResponseShape response_shape(const Vocabulary& vocab, int max_response_len, const Prompt& prompt,
                             std::span<const TokenId> response);

class RewardFeaturizer {
 public:
  RewardFeaturizer(Vocabulary vocab, int max_response_len)
      : vocab_(std::move(vocab)), max_response_len_(max_response_len) {}

  const Vocabulary& vocab() const { return vocab_; }
  int max_response_len() const { return max_response_len_; }
  std::string spec_id() const {
    return "rm1/" + vocab_.layout_id() + "/R" + std::to_string(max_response_len_);
  }
  RmFeatures features(const Prompt& prompt, std::span<const TokenId> response) const;

 private:
  Vocabulary vocab_;
  int max_response_len_;
};

struct RewardModelParams {
  std::string spec_id;
  std::vector<double> weights;  // kRmDim entries

  bool operator==(const RewardModelParams&) const = default;
};

RewardModelParams zero_reward_model(const RewardFeaturizer& f);

double rm_score(const RewardModelParams& model, const RewardFeaturizer& f, const Prompt& prompt,
                std::span<const TokenId> response);
// Score without the length-bucket terms.
double rm_content_score(const RewardModelParams& model, const RewardFeaturizer& f,
                        const Prompt& prompt, std::span<const TokenId> response);
double rm_score_features(std::span<const double> weights, const RmFeatures& x);

struct PreferencePair {
  Prompt prompt;
  TokenSeq chosen;
  TokenSeq rejected;
  std::string source;

  bool operator==(const PreferencePair&) const = default;
};

// Mean Bradley-Terry loss -ln sigma(w . d) over feature differences d =
// phi(chosen) - phi(rejected); gradient written to `grad` when non-empty.
double bt_loss(std::span<const double> weights, std::span<const RmFeatures> diffs,
               std::span<double> grad = {});

struct RmTrainReport {
  double final_loss = 0;
  double accuracy = 0;
  std::vector<double> loss_history;  // loss before each step, then final
};

RewardModelParams rm_train(const RewardFeaturizer& f, std::span<const PreferencePair> pairs,
                           double lr, int steps, std::uint64_t seed,
                           RmTrainReport* report = nullptr);

void save_reward_model(const std::filesystem::path& path, const RewardFeaturizer& f,
                       const RewardModelParams& model, const std::string& meta_json = "{}");
RewardModelParams load_reward_model(const std::filesystem::path& path, const RewardFeaturizer& f);

}  // namespace tlab
