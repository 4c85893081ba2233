#include "tlab/reward_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "tlab/error.hpp"
#include "tlab/io.hpp"
#include "tlab/policy.hpp"
#include "tlab/rng.hpp"

namespace tlab {

std::string_view rm_feature_name(int index) {
  static constexpr std::string_view kNames[] = {
      "aspects_covered", "aspects_missing", "aspects_extraneous", "marker_once",
      "marker_disciplined", "terminated", "sections", "sections_with_aspect",
      "len_le4", "len_le8", "len_le16", "len_le24", "len_gt24"};
  return kNames[index];
}

ResponseShape response_shape(const Vocabulary& vocab, int max_response_len, const Prompt& prompt,
                             std::span<const TokenId> response) {
  ResponseShape s;
  s.length = static_cast<int>(response.size());
  s.terminated = !response.empty() && response.back() == kEos && s.length < max_response_len;

  std::uint64_t required = 0;
  if (prompt.required_aspects)
    for (const auto& a : *prompt.required_aspects)
      if (auto id = vocab.find(a); id && vocab.is_aspect(*id))
        required |= std::uint64_t{1} << vocab.aspect_index(*id);

  std::uint64_t covered = 0, extra = 0;
  const auto sec = vocab.section();
  bool in_section = false, section_has_aspect = false;
  std::size_t marker_pos = response.size();
  for (std::size_t i = 0; i < response.size(); ++i) {
    const TokenId t = response[i];
    if (t == kAnswerMarker) {
      ++s.markers;
      marker_pos = i;
    }
    if (sec && t == *sec) {
      if (in_section && section_has_aspect) ++s.sections_with_aspect;
      ++s.sections;
      in_section = true;
      section_has_aspect = false;
    } else if (t == kAnswerMarker || t == kEos) {
      if (in_section && section_has_aspect) ++s.sections_with_aspect;
      in_section = false;
    }
    if (int a = vocab.aspect_index(t); a >= 0) {
      const std::uint64_t bit = std::uint64_t{1} << a;
      if (required & bit) {
        covered |= bit;
        if (in_section) section_has_aspect = true;
      } else {
        extra |= bit;
      }
    }
  }
  if (in_section && section_has_aspect) ++s.sections_with_aspect;  // unterminated tail
  s.covered = std::popcount(covered);
  s.missing = std::popcount(required) - s.covered;
  s.extraneous = std::popcount(extra);
  if (s.markers == 1 && s.terminated) {
    const std::size_t tail = response.size() - 1 - marker_pos - 1;
    bool plain = true;
    for (std::size_t i = marker_pos + 1; i + 1 < response.size(); ++i)
      if (vocab.is_aspect(response[i]) || (sec && response[i] == *sec)) plain = false;
    s.disciplined = tail >= 1 && tail <= 3 && plain;
  }
  return s;
}

RmFeatures RewardFeaturizer::features(const Prompt& prompt,
                                      std::span<const TokenId> response) const {
  const auto s = response_shape(vocab_, max_response_len_, prompt, response);
  RmFeatures x{};
  auto set = [&](RmFeature f, double v) { x[static_cast<std::size_t>(f)] = v; };
  set(RmFeature::aspects_covered, s.covered);
  set(RmFeature::aspects_missing, s.missing);
  set(RmFeature::aspects_extraneous, s.extraneous);
  set(RmFeature::marker_once, s.markers == 1 ? 1 : 0);
  set(RmFeature::marker_disciplined, s.disciplined ? 1 : 0);
  set(RmFeature::terminated, s.terminated ? 1 : 0);
  set(RmFeature::sections, std::min(s.sections, 4));
  set(RmFeature::sections_with_aspect, s.sections_with_aspect);
  const int n = s.length;
  set(n <= 4 ? RmFeature::len_le4
      : n <= 8 ? RmFeature::len_le8
      : n <= 16 ? RmFeature::len_le16
      : n <= 24 ? RmFeature::len_le24
                : RmFeature::len_gt24,
      1);
  return x;
}

RewardModelParams zero_reward_model(const RewardFeaturizer& f) {
  return {f.spec_id(), std::vector<double>(kRmDim, 0.0)};
}

namespace {

void check_model(const RewardModelParams& m, const RewardFeaturizer& f) {
  if (m.spec_id != f.spec_id() || m.weights.size() != static_cast<std::size_t>(kRmDim))
    throw ConfigError("reward model spec '" + m.spec_id + "' does not match '" + f.spec_id() +
                      "'");
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace

double rm_score_features(std::span<const double> weights, const RmFeatures& x) {
  double s = 0;
  for (int i = 0; i < kRmDim; ++i) s += weights[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
  return s;
}

double rm_score(const RewardModelParams& model, const RewardFeaturizer& f, const Prompt& prompt,
                std::span<const TokenId> response) {
  check_model(model, f);
  return rm_score_features(model.weights, f.features(prompt, response));
}

double rm_content_score(const RewardModelParams& model, const RewardFeaturizer& f,
                        const Prompt& prompt, std::span<const TokenId> response) {
  check_model(model, f);
  auto x = f.features(prompt, response);
  for (int i = kRmLengthFirst; i < kRmDim; ++i) x[static_cast<std::size_t>(i)] = 0;
  return rm_score_features(model.weights, x);
}

double bt_loss(std::span<const double> weights, std::span<const RmFeatures> diffs,
               std::span<double> grad) {
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  if (diffs.empty()) return 0.0;
  double loss = 0;
  const double inv = 1.0 / static_cast<double>(diffs.size());
  for (const auto& d : diffs) {
    const double z = rm_score_features(weights, d);
    loss += softplus(-z);
    if (!grad.empty()) {
      const double g = -sigmoid(-z) * inv;
      for (int i = 0; i < kRmDim; ++i) grad[static_cast<std::size_t>(i)] += g * d[static_cast<std::size_t>(i)];
    }
  }
  return loss * inv;
}

RewardModelParams rm_train(const RewardFeaturizer& f, std::span<const PreferencePair> pairs,
                           double lr, int steps, std::uint64_t seed, RmTrainReport* report) {
  if (pairs.empty()) throw ConfigError("rm_train needs at least one preference pair");
  if (!(lr > 0) || steps < 0) throw ConfigError("rm_train needs lr > 0 and steps >= 0");
  std::vector<RmFeatures> diffs;
  diffs.reserve(pairs.size());
  for (const auto& p : pairs) {
    const auto c = f.features(p.prompt, p.chosen);
    const auto r = f.features(p.prompt, p.rejected);
    RmFeatures d{};
    for (int i = 0; i < kRmDim; ++i) d[static_cast<std::size_t>(i)] = c[static_cast<std::size_t>(i)] - r[static_cast<std::size_t>(i)];
    diffs.push_back(d);
  }
  RewardModelParams m = zero_reward_model(f);
  Rng rng(seed);
  for (double& w : m.weights) w = rng.uniform(-0.01, 0.01);
  std::vector<double> grad(kRmDim);
  RmTrainReport rep;
  for (int step = 0; step <= steps; ++step) {
    const double loss = bt_loss(m.weights, diffs, grad);
    rep.loss_history.push_back(loss);
    bool finite = std::isfinite(loss);
    for (double g : grad) finite = finite && std::isfinite(g);
    if (!finite)
      throw NumericError("reward model loss became non-finite at step " + std::to_string(step) +
                         " (loss " + std::to_string(loss) + ")");
    if (step == steps) break;
    for (int i = 0; i < kRmDim; ++i) m.weights[static_cast<std::size_t>(i)] -= lr * grad[static_cast<std::size_t>(i)];
  }
  rep.final_loss = rep.loss_history.back();
  int correct = 0;
  for (const auto& d : diffs) correct += rm_score_features(m.weights, d) > 0 ? 1 : 0;
  rep.accuracy = correct / static_cast<double>(diffs.size());
  if (report) *report = std::move(rep);
  return m;
}

void save_reward_model(const std::filesystem::path& path, const RewardFeaturizer& f,
                       const RewardModelParams& model, const std::string& meta_json) {
  check_model(model, f);
  write_file_atomic(path, checkpoint_json(model.spec_id, f.vocab().size(), model.weights, meta_json));
}

RewardModelParams load_reward_model(const std::filesystem::path& path, const RewardFeaturizer& f) {
  auto c = load_checkpoint(path);
  RewardModelParams m{c.spec_id, std::move(c.weights)};
  if (c.vocab_size != f.vocab().size()) throw DataError(path.string() + ": vocab_size mismatch");
  check_model(m, f);
  return m;
}

}  // namespace tlab
