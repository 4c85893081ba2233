#include "tlab/config.hpp"

#include <cstdio>
#include <functional>
#include <map>
#include <set>

#include "tlab/error.hpp"
#include "tlab/io.hpp"
#include "tlab/rng.hpp"

namespace tlab {

using nlohmann::json;

namespace {

struct Field {
  std::function<void(ExperimentSpec&, const json&)> set;
  std::function<json(const ExperimentSpec&)> get;
};

template <typename T>
T as(const json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw std::invalid_argument("string");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw std::invalid_argument("number");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw std::invalid_argument("integer");
      if constexpr (std::is_unsigned_v<T>)
        if (v.is_number_integer() && !v.is_number_unsigned()) throw std::invalid_argument("non-negative integer");
    } else {
      if (!v.is_array()) throw std::invalid_argument("array");
      T out;
      for (const auto& e : v) out.push_back(as<typename T::value_type>(e, key));
      return out;
    }
    return v.get<T>();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key + ": expected " + e.what() + ", got " + v.dump());
  } catch (const json::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

#define TLAB_FIELD(key, member, T)                                              \
  {                                                                             \
    key, Field {                                                                \
      [](ExperimentSpec& s, const json& v) { s.member = as<T>(v, key); },       \
          [](const ExperimentSpec& s) { return json(s.member); }                \
    }                                                                           \
  }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f = {
      TLAB_FIELD("name", name, std::string),
      {"algo", {[](ExperimentSpec& s, const json& v) { s.train.algo = parse_algo(as<std::string>(v, "algo")); },
                [](const ExperimentSpec& s) { return json(std::string(to_string(s.train.algo))); }}},
      TLAB_FIELD("environment", train.environment, std::string),
      TLAB_FIELD("epochs", train.epochs, int),
      TLAB_FIELD("lr_actor", train.lr_actor, double),
      TLAB_FIELD("lr_critic", train.lr_critic, double),
      TLAB_FIELD("batch_size", train.batch_size, int),
      TLAB_FIELD("group_size", train.group_size, int),
      TLAB_FIELD("kl_beta", train.kl_beta, double),
      TLAB_FIELD("clip_epsilon", train.clip_epsilon, double),
      TLAB_FIELD("adv_epsilon", train.adv_epsilon, double),
      TLAB_FIELD("gae_gamma", train.gae_gamma, double),
      TLAB_FIELD("gae_lambda", train.gae_lambda, double),
      TLAB_FIELD("ppo_passes", train.ppo_passes, int),
      TLAB_FIELD("max_prompt_len", train.max_prompt_len, int),
      TLAB_FIELD("max_resp_len", train.max_resp_len, int),
      {"rm_norm", {[](ExperimentSpec& s, const json& v) { s.train.rm_norm = parse_rm_norm(as<std::string>(v, "rm_norm")); },
                   [](const ExperimentSpec& s) { return json(std::string(to_string(s.train.rm_norm))); }}},
      TLAB_FIELD("checkpoint_every", train.checkpoint_every, int),
      TLAB_FIELD("ref_refresh", train.ref_refresh, int),
      TLAB_FIELD("seeds", seeds, std::vector<std::uint64_t>),
      TLAB_FIELD("benchmarks", benchmarks, std::vector<std::string>),
      TLAB_FIELD("corpus_seed", corpus_seed, std::uint64_t),
      TLAB_FIELD("vocab_size", vocab_size, int),
      TLAB_FIELD("n_arithmetic", counts.arithmetic, int),
      TLAB_FIELD("n_sort", counts.sort, int),
      TLAB_FIELD("n_copy", counts.copy, int),
      TLAB_FIELD("n_writing", counts.writing, int),
      TLAB_FIELD("pref_pairs", pref_pairs, int),
      TLAB_FIELD("rm_lr", rm_lr, double),
      TLAB_FIELD("rm_steps", rm_steps, int),
      TLAB_FIELD("init_noise", init.noise, double),
      TLAB_FIELD("format_bias", init.format_bias, double),
      TLAB_FIELD("skill_prior", init.skill_prior, double),
      TLAB_FIELD("skill_next_prior", init.skill_next_prior, double),
      TLAB_FIELD("arith_next_prior", init.arith_next_prior, double),
      TLAB_FIELD("digit_prior", init.digit_prior, double),
      TLAB_FIELD("base_checkpoint", base_checkpoint, std::string),
      {"stage2_algo", {[](ExperimentSpec& s, const json& v) { s.stage2_algo = parse_algo(as<std::string>(v, "stage2_algo")); },
                       [](const ExperimentSpec& s) { return json(std::string(to_string(s.stage2_algo))); }}},
      TLAB_FIELD("stage2_environment", stage2_environment, std::string),
      TLAB_FIELD("stage2_epochs", stage2_epochs, int),
      TLAB_FIELD("stage2_lr_actor", stage2_lr_actor, double),
      TLAB_FIELD("stage2_batch_size", stage2_batch_size, int),
      TLAB_FIELD("stage2_group_size", stage2_group_size, int),
      TLAB_FIELD("stage2_benchmarks", stage2_benchmarks, std::vector<std::string>),
      TLAB_FIELD("sizes", sizes, std::vector<int>),
      TLAB_FIELD("eval_epochs", eval_epochs, std::vector<int>),
      TLAB_FIELD("pass_n", pass_n, int),
      TLAB_FIELD("pass_ks", pass_ks, std::vector<int>),
  };
  return f;
}

#undef TLAB_FIELD

const std::set<std::string> kBenchmarks = {"open-quality", "arith-hard", "arith-comp", "transduce"};
const std::set<std::string> kEnvironments = {"open", "in_domain", "transduce"};

}  // namespace

void ExperimentSpec::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (name.empty() || name.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789._-") != std::string::npos || name[0] == '.')
    fail("name: must be non-empty and use only letters, digits, '.', '_' or '-'");
  train.validate();
  if (!kEnvironments.count(train.environment))
    fail("environment: unknown pool '" + train.environment + "' (open, in_domain, transduce)");
  if (seeds.empty()) fail("seeds: must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    fail("seeds: must be distinct");
  for (const auto* list : {&benchmarks, &stage2_benchmarks}) {
    for (const auto& b : *list)
      if (!kBenchmarks.count(b)) fail("benchmarks: unknown benchmark '" + b + "'");
    if (list->empty()) fail("benchmarks: must not be empty");
  }
  if (vocab_size < 2 || vocab_size > 4096) fail("vocab_size: must lie in [2, 4096]");
  for (auto [k, v] : {std::pair{"n_arithmetic", counts.arithmetic}, {"n_sort", counts.sort},
                      {"n_copy", counts.copy}, {"n_writing", counts.writing}})
    if (v < 0) fail(std::string(k) + ": must be >= 0");
  if (pref_pairs < 1) fail("pref_pairs: must be >= 1");
  if (!(rm_lr > 0)) fail("rm_lr: must be > 0");
  if (rm_steps < 0) fail("rm_steps: must be >= 0");
  if (!(init.noise >= 0)) fail("init_noise: must be >= 0");
  if (!kEnvironments.count(stage2_environment))
    fail("stage2_environment: unknown pool '" + stage2_environment + "'");
  stage2_config().validate();
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 0) fail("sizes: must be >= 0");
    if (i && sizes[i] < sizes[i - 1]) fail("sizes: must be nondecreasing");
  }
  // The upper bound against epochs is checked by the epoch sweep, the only user.
  for (int e : eval_epochs)
    if (e < 0) fail("eval_epochs: must be >= 0");
  if (pass_n < 1) fail("pass_n: must be >= 1");
  for (int k : pass_ks)
    if (k < 1 || k > pass_n) fail("pass_ks: every k must lie in [1, pass_n]");
}

TrainConfig ExperimentSpec::stage2_config() const {
  TrainConfig c = train;
  c.algo = stage2_algo;
  c.environment = stage2_environment;
  c.epochs = stage2_epochs;
  c.lr_actor = stage2_lr_actor;
  c.batch_size = stage2_batch_size;
  c.group_size = stage2_group_size;
  return c;
}

ExperimentSpec default_spec() { return ExperimentSpec{}; }

ExperimentSpec parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  ExperimentSpec s;
  const auto& f = fields();
  for (const auto& [key, value] : j.items()) {
    auto it = f.find(key);
    if (it == f.end()) throw ConfigError(key + ": unknown config key");
    it->second.set(s, value);
  }
  s.validate();
  return s;
}

ExperimentSpec load_config(const std::filesystem::path& path) {
  const auto text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentSpec& spec) {
  json j = json::object();
  for (const auto& [key, field] : fields()) j[key] = field.get(spec);
  return j;
}

std::string canonical_config(const ExperimentSpec& spec) { return to_json(spec).dump(2) + "\n"; }

std::string config_hash(const ExperimentSpec& spec) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(hash_string(to_json(spec).dump())));
  return buf;
}

}  // namespace tlab
