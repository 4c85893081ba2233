#include "tlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "tlab/error.hpp"
#include "tlab/io.hpp"
#include "tlab/rng.hpp"

namespace tlab {

PolicyParams init_policy(const FeatureSpec& spec, std::uint64_t seed, const InitOptions& opt) {
  Rng rng(seed);
  PolicyParams p{spec.spec_id(), std::vector<double>(static_cast<std::size_t>(spec.total_dim()))};
  for (int i = 0; i < spec.total_dim(); ++i) {
    double w = rng.uniform(-opt.noise, opt.noise);
    if (spec.is_format(i)) w += opt.format_bias;
    if (spec.is_skill(i)) w += opt.skill_prior;
    p.weights[static_cast<std::size_t>(i)] = w;
  }
  for (int slot = 0; slot < kSkillSlots; ++slot) {
    const double next = slot == domain_slot(domains::arithmetic) ? opt.arith_next_prior
                                                                 : opt.skill_next_prior;
    p.weights[static_cast<std::size_t>(spec.skill_index(slot, SkillFeature::next))] +=
        next - opt.skill_prior;
  }
  for (auto d : {domains::arithmetic, domains::sort, domains::copy})
    for (int k = 0; k < 10; ++k)
      if (auto t = spec.vocab().digit(k))
        p.weights[static_cast<std::size_t>(spec.domain_index(domain_slot(d), *t))] += opt.digit_prior;
  return p;
}

PolicyParams zero_policy(const FeatureSpec& spec) {
  return {spec.spec_id(), std::vector<double>(static_cast<std::size_t>(spec.total_dim()), 0.0)};
}

void check_compatible(const FeatureSpec& spec, const PolicyParams& params) {
  if (params.spec_id != spec.spec_id() ||
      params.weights.size() != static_cast<std::size_t>(spec.total_dim()))
    throw ConfigError("policy spec '" + params.spec_id + "' does not match feature spec '" +
                      spec.spec_id() + "'");
}

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> p(scores.size(), 0.0);
  double mx = -std::numeric_limits<double>::infinity();
  for (double s : scores) mx = std::max(mx, s);
  if (!std::isfinite(mx)) throw NumericError("softmax over no finite scores");
  double z = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - mx);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

void step_scores(const FeatureSpec& spec, const PolicyParams& params, const PromptContext& ctx,
                 const StepState& state, std::span<double> out) {
  FeatureList f;
  const double* w = params.weights.data();
  for (int v = 0; v < spec.vocab_size(); ++v) {
    spec.active_features(ctx, state, static_cast<TokenId>(v), f);
    double s = 0;
    for (int i : f.view()) s += w[i];
    out[static_cast<std::size_t>(v)] = s;
  }
}

namespace {

bool forced(const FeatureSpec& spec, const StepState& state) {
  return state.length >= spec.max_response_len() - 1;
}

void normalize_in_place(std::span<double> s) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : s) mx = std::max(mx, x);
  if (!std::isfinite(mx)) throw NumericError("non-finite policy scores");
  double z = 0;
  for (double& x : s) {
    x = std::exp(x - mx);
    z += x;
  }
  for (double& x : s) x /= z;
}

// Log-probabilities of a full step distribution (forced steps excluded).
void step_log_distribution(const FeatureSpec& spec, const PolicyParams& params,
                           const PromptContext& ctx, const StepState& state,
                           std::span<double> out) {
  step_scores(spec, params, ctx, state, out);
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : out) mx = std::max(mx, x);
  if (!std::isfinite(mx)) throw NumericError("non-finite policy scores");
  double z = 0;
  for (double x : out) z += std::exp(x - mx);
  const double lz = mx + std::log(z);
  for (double& x : out) x -= lz;
}

}  // namespace

void step_distribution(const FeatureSpec& spec, const PolicyParams& params,
                       const PromptContext& ctx, const StepState& state, std::span<double> out) {
  if (forced(spec, state)) {
    std::fill(out.begin(), out.end(), 0.0);
    out[kEos] = 1.0;
    return;
  }
  step_scores(spec, params, ctx, state, out);
  normalize_in_place(out);
}

std::vector<double> next_token_dist(const FeatureSpec& spec, const PolicyParams& params,
                                    const Prompt& prompt, std::span<const TokenId> prefix) {
  check_compatible(spec, params);
  if (static_cast<int>(prefix.size()) >= spec.max_response_len())
    throw DataError("prefix reaches the maximum response length");
  if (std::find(prefix.begin(), prefix.end(), kEos) != prefix.end())
    throw DataError("prefix already contains <eos>");
  const auto ctx = spec.context(prompt);
  const auto state = spec.state_after(ctx, prefix);
  std::vector<double> p(static_cast<std::size_t>(spec.vocab_size()));
  step_distribution(spec, params, ctx, state, p);
  return p;
}

TokenSeq sample_response(const FeatureSpec& spec, const PolicyParams& params,
                         const PromptContext& ctx, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  StepState state;
  TokenSeq out;
  std::vector<double> p(static_cast<std::size_t>(spec.vocab_size()));
  for (;;) {
    step_distribution(spec, params, ctx, state, p);
    // Inverse CDF over the fixed token order.
    const double u = rng.uniform();
    double cum = 0;
    int chosen = -1;
    for (int v = 0; v < spec.vocab_size(); ++v) {
      const double pv = p[static_cast<std::size_t>(v)];
      cum += pv;
      if (pv > 0) chosen = v;
      if (u < cum && pv > 0) break;
    }
    const auto tok = static_cast<TokenId>(chosen);
    out.push_back(tok);
    if (tok == kEos) return out;
    spec.advance(ctx, state, tok);
  }
}

TokenSeq sample_response(const FeatureSpec& spec, const PolicyParams& params,
                         const Prompt& prompt, std::uint64_t rng_seed) {
  check_compatible(spec, params);
  return sample_response(spec, params, spec.context(prompt), rng_seed);
}

TokenSeq greedy_response(const FeatureSpec& spec, const PolicyParams& params,
                         const PromptContext& ctx) {
  StepState state;
  TokenSeq out;
  std::vector<double> s(static_cast<std::size_t>(spec.vocab_size()));
  for (;;) {
    TokenId tok = kEos;
    if (!forced(spec, state)) {
      step_scores(spec, params, ctx, state, s);
      tok = static_cast<TokenId>(std::max_element(s.begin(), s.end()) - s.begin());
    }
    out.push_back(tok);
    if (tok == kEos) return out;
    spec.advance(ctx, state, tok);
  }
}

void check_response(const FeatureSpec& spec, std::span<const TokenId> response) {
  if (response.empty() || response.back() != kEos)
    throw DataError("response is not terminated by <eos>");
  if (static_cast<int>(response.size()) > spec.max_response_len())
    throw DataError("response longer than max response length " +
                    std::to_string(spec.max_response_len()));
  if (std::find(response.begin(), response.end() - 1, kEos) != response.end() - 1)
    throw DataError("response contains <eos> before its end");
  for (auto t : response)
    if (t >= spec.vocab_size()) throw DataError("response token out of vocabulary");
}

std::vector<double> step_logprobs(const FeatureSpec& spec, const PolicyParams& params,
                                  const PromptContext& ctx, std::span<const TokenId> response) {
  check_response(spec, response);
  std::vector<double> out;
  out.reserve(response.size());
  std::vector<double> lp(static_cast<std::size_t>(spec.vocab_size()));
  StepState state;
  for (auto tok : response) {
    if (forced(spec, state)) {
      out.push_back(0.0);  // probability-1 step
    } else {
      step_log_distribution(spec, params, ctx, state, lp);
      out.push_back(lp[tok]);
    }
    spec.advance(ctx, state, tok);
  }
  return out;
}

double sequence_logprob(const FeatureSpec& spec, const PolicyParams& params,
                        const PromptContext& ctx, std::span<const TokenId> response) {
  double total = 0;
  for (double x : step_logprobs(spec, params, ctx, response)) total += x;
  return total;
}

double sequence_logprob(const FeatureSpec& spec, const PolicyParams& params,
                        const Prompt& prompt, std::span<const TokenId> response) {
  check_compatible(spec, params);
  return sequence_logprob(spec, params, spec.context(prompt), response);
}

void accumulate_logprob_gradient(const FeatureSpec& spec, const PolicyParams& params,
                                 const PromptContext& ctx, std::span<const TokenId> response,
                                 std::span<const double> step_weight, std::span<double> grad) {
  check_response(spec, response);
  if (!step_weight.empty() && step_weight.size() != response.size())
    throw ConfigError("step weights do not match response length");
  std::vector<double> p(static_cast<std::size_t>(spec.vocab_size()));
  FeatureList f;
  StepState state;
  for (std::size_t t = 0; t < response.size(); ++t) {
    const TokenId tok = response[t];
    const double w = step_weight.empty() ? 1.0 : step_weight[t];
    if (!forced(spec, state) && w != 0.0) {
      step_distribution(spec, params, ctx, state, p);
      spec.active_features(ctx, state, tok, f);
      for (int i : f.view()) grad[static_cast<std::size_t>(i)] += w;
      for (int v = 0; v < spec.vocab_size(); ++v) {
        const double pv = p[static_cast<std::size_t>(v)];
        if (pv == 0.0) continue;
        spec.active_features(ctx, state, static_cast<TokenId>(v), f);
        for (int i : f.view()) grad[static_cast<std::size_t>(i)] -= w * pv;
      }
    }
    spec.advance(ctx, state, tok);
  }
}

std::vector<double> logprob_gradient(const FeatureSpec& spec, const PolicyParams& params,
                                     const Prompt& prompt, std::span<const TokenId> response) {
  check_compatible(spec, params);
  std::vector<double> g(static_cast<std::size_t>(spec.total_dim()), 0.0);
  accumulate_logprob_gradient(spec, params, spec.context(prompt), response, {}, g);
  return g;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  double kl = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0) kl += p[i] * (std::log(p[i]) - std::log(q[i]));
  return std::max(kl, 0.0);
}

double exact_step_kl(const FeatureSpec& spec, const PolicyParams& policy,
                     const ReferencePolicy& reference, const PromptContext& ctx,
                     const StepState& state) {
  if (forced(spec, state)) return 0.0;
  const auto n = static_cast<std::size_t>(spec.vocab_size());
  std::vector<double> lp(n), lq(n);
  step_log_distribution(spec, policy, ctx, state, lp);
  step_log_distribution(spec, reference.params(), ctx, state, lq);
  double kl = 0;
  for (std::size_t i = 0; i < n; ++i) kl += std::exp(lp[i]) * (lp[i] - lq[i]);
  // Rounding can leave a tiny negative residue when the distributions agree.
  return std::max(kl, 0.0);
}

double exact_step_kl(const FeatureSpec& spec, const PolicyParams& policy,
                     const ReferencePolicy& reference, const Prompt& prompt,
                     std::span<const TokenId> prefix) {
  check_compatible(spec, policy);
  if (reference.params().spec_id != policy.spec_id)
    throw ConfigError("reference policy spec differs from live policy");
  const auto ctx = spec.context(prompt);
  return exact_step_kl(spec, policy, reference, ctx, spec.state_after(ctx, prefix));
}

// ---- checkpoints ---------------------------------------------------------

std::string checkpoint_json(const std::string& spec_id, int vocab_size,
                            std::span<const double> weights, const std::string& meta_json) {
  std::string out = "{\"spec_id\":" + nlohmann::json(spec_id).dump() +
                    ",\"vocab_size\":" + std::to_string(vocab_size) +
                    ",\"weights\":" + format_double_array(weights) + ",\"meta\":" + meta_json +
                    "}\n";
  return out;
}

void save_policy(const std::filesystem::path& path, const FeatureSpec& spec,
                 const PolicyParams& params, const std::string& meta_json) {
  check_compatible(spec, params);
  write_file_atomic(path, checkpoint_json(params.spec_id, spec.vocab_size(), params.weights,
                                          meta_json));
}

Checkpoint parse_checkpoint(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    Checkpoint c;
    c.spec_id = j.at("spec_id").get<std::string>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.weights = j.at("weights").get<std::vector<double>>();
    c.meta_json = j.contains("meta") ? j.at("meta").dump() : "{}";
    for (double w : c.weights)
      if (!std::isfinite(w)) throw DataError("checkpoint holds a non-finite weight");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return parse_checkpoint(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

PolicyParams load_policy(const std::filesystem::path& path, const FeatureSpec& spec) {
  auto c = load_checkpoint(path);
  if (c.vocab_size != spec.vocab_size())
    throw DataError(path.string() + ": vocab_size mismatch");
  PolicyParams p{c.spec_id, std::move(c.weights)};
  check_compatible(spec, p);
  return p;
}

}  // namespace tlab
