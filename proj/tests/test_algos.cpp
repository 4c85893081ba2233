#include <doctest.h>

#include <cmath>
#include <numeric>

#include "tlab/algos.hpp"
#include "tlab/error.hpp"
#include "tlab/lab.hpp"
#include "tlab/rng.hpp"

using namespace tlab;

namespace {

const TaskSuite& suite() {
  static const TaskSuite s = generate_task_suite(7, {40, 10, 10, 40}, 64);
  return s;
}

const FeatureSpec& spec() {
  static const FeatureSpec f(suite().vocab, 16);
  return f;
}

TrainConfig small_config(Algo algo) {
  TrainConfig c;
  c.algo = algo;
  c.epochs = 3;
  c.batch_size = 16;
  c.max_resp_len = 16;
  c.seed = 11;
  return c;
}

const RewardSource& verifier() {
  static const RewardSource r = RewardSource::from_verifier(VerifierKind::exact());
  return r;
}

std::vector<std::size_t> first_n(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

}  // namespace

TEST_CASE("group advantages: zero mean, unit spread, input checks") {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> r(2 + rng.below(10));
    for (auto& x : r) x = rng.uniform(-4, 4);
    const auto a = grpo_advantages(r, 1e-8);
    double mean = 0, sq = 0;
    for (double x : a) mean += x;
    mean /= static_cast<double>(a.size());
    for (double x : a) sq += x * x;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
    CHECK(sq / static_cast<double>(a.size()) == doctest::Approx(1.0).epsilon(1e-6));
    // Positive rescaling leaves them unchanged up to the epsilon.
    auto scaled = r;
    for (auto& x : scaled) x *= 7.0;
    const auto b = grpo_advantages(scaled, 1e-8);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-6));
  }
  CHECK_THROWS_AS(grpo_advantages(std::vector<double>{1.0}, 1e-8), ConfigError);
  CHECK_THROWS_AS(grpo_advantages(std::vector<double>{1.0, 2.0}, 0.0), ConfigError);
}

TEST_CASE("shaping: terminal reward minus KL, then GAE") {
  const auto& p = suite().in_domain.prompts[0];
  Rollout r;
  r.response = {5, 6, kEos};
  r.logprobs.assign(3, -1.0);
  r.kl = {0.1, 0.2, 0.3};
  r.reward = 2.0;
  const auto critic = zero_value(spec());
  shape_rollout(spec(), critic, p, 0.5, 1.0, 1.0, r);
  CHECK(r.shaped[0] == doctest::Approx(-0.05));
  CHECK(r.shaped[2] == doctest::Approx(1.85));
  CHECK(r.advantages[0] == doctest::Approx(1.7));
  CHECK(r.advantages[1] == doctest::Approx(1.75));
  CHECK(r.advantages[2] == doctest::Approx(1.85));
  CHECK(r.returns == r.advantages);
  shape_rollout(spec(), critic, p, 0.5, 1.0, 0.0, r);
  for (std::size_t t = 0; t < 3; ++t) CHECK(r.advantages[t] == doctest::Approx(r.shaped[t]));

  // With a nonzero critic, returns stay advantages plus values.
  auto c2 = critic;
  c2.weights[0] = 0.3;
  shape_rollout(spec(), c2, p, 0.5, 0.9, 0.8, r);
  for (std::size_t t = 0; t < 3; ++t) CHECK(r.returns[t] == doctest::Approx(r.advantages[t] + r.values[t]));
  r.kl.pop_back();
  CHECK_THROWS_AS(shape_rollout(spec(), critic, p, 0.5, 1.0, 1.0, r), DataError);
}

TEST_CASE("rollout collection does not depend on the thread count") {
  const auto pol = init_policy(spec(), 1);
  const auto ref = ReferencePolicy::snapshot(init_policy(spec(), 2));
  const auto idx = first_n(suite().in_domain.size());
  const auto a = collect_rollouts(spec(), pol, ref, suite().in_domain, idx, verifier(), 5, {1, 3});
  const auto b = collect_rollouts(spec(), pol, ref, suite().in_domain, idx, verifier(), 5, {4, 3});
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].response == b[i].response);
    CHECK(a[i].logprobs == b[i].logprobs);
    CHECK(a[i].kl == b[i].kl);
  }
  const auto c = collect_rollouts(spec(), pol, ref, suite().in_domain, idx, verifier(), 5, {1, 4});
  int same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i].response == c[i].response;
  CHECK(same < static_cast<int>(a.size()));
}

TEST_CASE("clipping zeroes the step of runaway ratios") {
  const auto& pool = suite().in_domain;
  const auto pol = init_policy(spec(), 4);
  const auto ref = ReferencePolicy::snapshot(pol);
  auto rollouts = collect_rollouts(spec(), pol, ref, pool, first_n(8), verifier(), 2);
  auto critic = zero_value(spec());
  for (auto& r : rollouts) {
    r.reward = 1.0;
    shape_rollout(spec(), critic, pool.prompts[r.prompt_index], 0.0, 1.0, 1.0, r);
    for (auto& lp : r.logprobs) lp -= 1.0;  // ratio e > 1 + epsilon
  }
  auto cfg = small_config(Algo::ppo);
  auto moved = pol;
  auto st = ppo_update(spec(), moved, critic, pool, rollouts, cfg);
  CHECK(st.clip_frac == 1.0);
  CHECK(moved == pol);

  // Negative advantages at the same ratio are not clipped.
  for (auto& r : rollouts)
    for (auto& a : r.advantages) a = -1.0;
  moved = pol;
  st = ppo_update(spec(), moved, critic, pool, rollouts, cfg);
  CHECK(st.clip_frac == 0.0);
  CHECK(moved != pol);
}

TEST_CASE("ppo update refuses unshaped rollouts") {
  const auto pol = init_policy(spec(), 4);
  auto rollouts = collect_rollouts(spec(), pol, ReferencePolicy::snapshot(pol), suite().in_domain,
                                   first_n(2), verifier(), 2);
  auto critic = zero_value(spec());
  auto moved = pol;
  CHECK_THROWS_AS(ppo_update(spec(), moved, critic, suite().in_domain, rollouts, small_config(Algo::ppo)),
                  DataError);
}

TEST_CASE("grpo: equal rewards leave the policy unchanged") {
  const auto pol = init_policy(spec(), 6);
  auto groups = collect_groups(spec(), pol, suite().in_domain, first_n(10), verifier(), 4, 3);
  for (auto& g : groups) {
    std::vector<double> rw(g.rollouts.size(), 0.7);
    g.advantages = grpo_advantages(rw, 1e-8);
  }
  auto moved = pol;
  grpo_update(spec(), moved, suite().in_domain, groups, small_config(Algo::grpo));
  CHECK(moved == pol);
}

TEST_CASE("grpo step equals the group-normalized score-function sum") {
  const auto& pool = suite().in_domain;
  const auto pol = init_policy(spec(), 6, InitOptions{1.0, 0.0, 0.0, 0.0, 0.0, 0.0});
  auto groups = collect_groups(spec(), pol, pool, first_n(6), verifier(), 4, 3);
  Rng rng(8);
  for (auto& g : groups) {
    std::vector<double> rw;
    for (std::size_t j = 0; j < g.rollouts.size(); ++j) rw.push_back(rng.uniform());
    g.advantages = grpo_advantages(rw, 1e-8);
  }
  const auto cfg = small_config(Algo::grpo);
  std::vector<double> want = pol.weights;
  for (const auto& g : groups)
    for (std::size_t j = 0; j < g.rollouts.size(); ++j) {
      const auto lg = logprob_gradient(spec(), pol, pool.prompts[g.prompt_index], g.rollouts[j].response);
      for (std::size_t k = 0; k < want.size(); ++k)
        want[k] += cfg.lr_actor * (g.advantages[j] / 4.0) * lg[k] / static_cast<double>(groups.size());
    }
  auto moved = pol;
  grpo_update(spec(), moved, pool, groups, cfg, 3);
  for (std::size_t k = 0; k < want.size(); ++k) CHECK(moved.weights[k] == doctest::Approx(want[k]).epsilon(1e-12));
}

TEST_CASE("maximum likelihood raises the gold likelihood") {
  std::vector<SupervisedPair> data;
  for (const auto& p : suite().in_domain.prefix(10).prompts) {
    TokenSeq g{kAnswerMarker};
    g.insert(g.end(), p.gold->begin(), p.gold->end());
    g.push_back(kEos);
    data.push_back({p, g});
  }
  const auto pol = init_policy(spec(), 2);
  const double before = mle_objective(spec(), pol, data);
  const auto after = mle_update(spec(), pol, data, 0.5, 20, 1);
  CHECK(mle_objective(spec(), after, data) > before);
  CHECK(mle_update(spec(), pol, data, 0.5, 0, 1) == pol);
  CHECK_THROWS_AS(mle_update(spec(), pol, data, 0.5, -1, 1), ConfigError);
  data[0].gold.push_back(kEos);
  CHECK_THROWS_AS(mle_update(spec(), pol, data, 0.5, 1, 1), DataError);
}

TEST_CASE("config validation names the field") {
  auto check = [](TrainConfig c, const char* field) {
    try {
      c.validate();
      FAIL("expected a ConfigError for " << field);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(field) == 0);
    }
  };
  TrainConfig c;
  c.epochs = -1;
  check(c, "epochs");
  c = {};
  c.algo = Algo::grpo;
  c.group_size = 1;
  check(c, "group_size");
  c = {};
  c.clip_epsilon = 1.5;
  check(c, "clip_epsilon");
  c = {};
  c.kl_beta = -0.1;
  check(c, "kl_beta");
  c = {};
  c.batch_size = -2;
  check(c, "batch_size");
  CHECK_NOTHROW(TrainConfig{}.validate());
}

TEST_CASE("zero epochs or an empty batch leave the policy untouched") {
  const auto pol = init_policy(spec(), 9);
  auto cfg = small_config(Algo::ppo);
  cfg.epochs = 0;
  auto run = train_run(spec(), pol, suite().in_domain, verifier(), cfg);
  CHECK(run.policy == pol);
  CHECK(run.log.empty());
  cfg.epochs = 2;
  cfg.batch_size = 0;
  run = train_run(spec(), pol, suite().in_domain, verifier(), cfg);
  CHECK(run.policy == pol);
  CHECK(run.log.size() == 2);
  cfg.max_resp_len = 8;
  CHECK_THROWS_AS(train_run(spec(), pol, suite().in_domain, verifier(), cfg), ConfigError);
  cfg.max_resp_len = 16;
  CHECK_THROWS_AS(train_run(spec(), pol, suite().open, verifier(), cfg), ConfigError);
}

TEST_CASE("training is independent of the thread count") {
  const auto pol = init_policy(spec(), 9);
  for (auto algo : {Algo::ppo, Algo::grpo}) {
    const auto cfg = small_config(algo);
    TrainHooks h1, h4;
    h4.threads = 4;
    const auto a = train_run(spec(), pol, suite().in_domain, verifier(), cfg, h1);
    const auto b = train_run(spec(), pol, suite().in_domain, verifier(), cfg, h4);
    CHECK(a.policy == b.policy);
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(to_jsonl(a.log[i]) == to_jsonl(b.log[i]));
  }
}

TEST_CASE("hooks: epoch 0 first, evaluation on checkpoint epochs") {
  const auto pol = init_policy(spec(), 9);
  auto cfg = small_config(Algo::grpo);
  cfg.epochs = 4;
  cfg.checkpoint_every = 2;
  std::vector<int> seen;
  TrainHooks h;
  h.on_epoch = [&](int e, const PolicyParams&) { seen.push_back(e); };
  h.evaluate = [](const PolicyParams&) { return EvalSnapshot{{{"x", 1.0}}}; };
  const auto run = train_run(spec(), pol, suite().in_domain, verifier(), cfg, h, "s");
  CHECK(seen == std::vector<int>{0, 1, 2, 3, 4});
  CHECK(!run.log[0].eval);
  CHECK(run.log[1].eval);
  CHECK(run.log[3].eval);
  CHECK(run.log[0].stage == "s");
  CHECK(to_jsonl(run.log[1]).find("\"eval\":{\"x\":1}") != std::string::npos);
}

TEST_CASE("two-stage bookkeeping") {
  const auto pol = init_policy(spec(), 9);
  auto c1 = small_config(Algo::ppo);
  auto c2 = small_config(Algo::grpo);
  c1.epochs = 2;
  c2.epochs = 0;
  auto res = two_stage_run(spec(), pol, suite().in_domain, verifier(), c1, suite().in_domain, verifier(), c2);
  CHECK(res.stage2 == res.stage1);
  CHECK(res.log.size() == 2);
  c2.epochs = 3;
  std::vector<int> seen;
  TrainHooks h;
  h.on_epoch = [&](int e, const PolicyParams&) { seen.push_back(e); };
  res = two_stage_run(spec(), pol, suite().in_domain, verifier(), c1, suite().in_domain, verifier(), c2, h);
  CHECK(res.log.size() == 5);
  CHECK(res.log[0].stage == "stage1");
  CHECK(res.log[4].stage == "stage2");
  CHECK(seen == std::vector<int>{0, 1, 2, 3, 4, 5});
  CHECK(res.stage2 != res.stage1);
}

TEST_CASE("in-domain PPO raises the mean training reward") {
  const auto spec_ = default_spec();
  const Lab lab(spec_, 7);
  auto cfg = spec_.train;
  cfg.environment = "in_domain";
  cfg = lab.train_config(cfg, "check");
  const auto run = train_run(lab.features(), lab.base(), lab.pool("in_domain"),
                             lab.reward_for("in_domain"), cfg);
  REQUIRE(run.log.size() == static_cast<std::size_t>(cfg.epochs));
  MESSAGE("epoch 1 reward " << run.log.front().mean_reward << ", last " << run.log.back().mean_reward);
  CHECK(run.log.back().mean_reward > run.log.front().mean_reward);
}
