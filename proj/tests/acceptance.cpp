// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "tlab/algos.hpp"
#include "tlab/config.hpp"
#include "tlab/eval.hpp"
#include "tlab/experiments.hpp"
#include "tlab/io.hpp"
#include "tlab/preferences.hpp"
#include "tlab/rng.hpp"

namespace fs = std::filesystem;
using namespace tlab;

namespace {

// Tolerances and thresholds, pinned.
constexpr double kFdStep = 1e-6;
constexpr double kFdRelTol = 1e-5;
constexpr int kFdCases = 100;
constexpr double kFdSeconds = 30.0;
constexpr double kAdvTol = 1e-6;
constexpr double kNormTol = 1e-9;
constexpr int kNormPolicies = 50;
constexpr int kKlPairs = 10000;
constexpr double kKlTwoToken = 0.13081;
constexpr double kKlTol = 1e-5;
constexpr int kPassMaxN = 12;
constexpr double kPassSpotTol = 1e-6;
constexpr double kPpoTol = 1e-10;
constexpr int kSeedsNeeded = 4;
constexpr double kAblationSeconds = 600.0;

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<const Prompt*> all_prompts(const TaskSuite& s) {
  std::vector<const Prompt*> out;
  for (const auto* pool : {&s.open, &s.in_domain, &s.transduce})
    for (const auto& p : pool->prompts) out.push_back(&p);
  for (const auto& [_, pool] : s.benchmarks)
    for (const auto& p : pool.prompts) out.push_back(&p);
  return out;
}

PolicyParams random_policy(const FeatureSpec& spec, std::uint64_t seed) {
  // Alternate between the training initialization and a wide uniform draw.
  if (seed % 2) return init_policy(spec, seed);
  InitOptions wide{1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  return init_policy(spec, seed, wide);
}

// Relative error of an analytic gradient against central differences on a
// subset of coordinates: every coordinate with a nonzero analytic entry
// (at most 200 of them, picked at random) plus 10 random others.
double fd_rel_error(const std::function<double(const std::vector<double>&)>& f,
                    std::vector<double> w, const std::vector<double>& grad, Rng& rng) {
  std::vector<std::size_t> nz, coords;
  for (std::size_t j = 0; j < grad.size(); ++j)
    if (grad[j] != 0.0) nz.push_back(j);
  rng.shuffle(nz.begin(), nz.end());
  if (nz.size() > 200) nz.resize(200);
  coords = nz;
  for (int i = 0; i < 10; ++i) coords.push_back(rng.below(grad.size()));
  double diff = 0, scale = 1e-12;
  for (auto j : coords) {
    const double keep = w[j];
    w[j] = keep + kFdStep;
    const double up = f(w);
    w[j] = keep - kFdStep;
    const double down = f(w);
    w[j] = keep;
    const double fd = (up - down) / (2 * kFdStep);
    diff = std::max(diff, std::abs(fd - grad[j]));
    scale = std::max({scale, std::abs(fd), std::abs(grad[j])});
  }
  return diff / scale;
}

void gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto suite = generate_task_suite(11, {40, 20, 20, 40}, 64);
  const FeatureSpec spec(suite.vocab, 8);
  const auto prompts = all_prompts(suite);
  Rng rng(2024);

  // Log-probability of one response.
  double worst_lp = 0;
  for (int c = 0; c < kFdCases; ++c) {
    const auto pol = random_policy(spec, 100 + static_cast<std::uint64_t>(c));
    const auto& p = *prompts[rng.below(prompts.size())];
    TokenSeq resp;
    if (p.gold && c % 3 == 0) {
      resp = {kAnswerMarker};
      resp.insert(resp.end(), p.gold->begin(), p.gold->end());
      resp.resize(std::min<std::size_t>(resp.size(), 7));
      resp.push_back(kEos);
    } else {
      resp = sample_response(spec, pol, p, rng.next());
    }
    const auto g = logprob_gradient(spec, pol, p, resp);
    auto f = [&](const std::vector<double>& w) {
      return sequence_logprob(spec, PolicyParams{pol.spec_id, w}, p, resp);
    };
    worst_lp = std::max(worst_lp, fd_rel_error(f, pol.weights, g, rng));
  }

  // Supervised objective over a small batch.
  double worst_mle = 0;
  for (int c = 0; c < kFdCases; ++c) {
    const auto pol = random_policy(spec, 500 + static_cast<std::uint64_t>(c));
    std::vector<SupervisedPair> data;
    for (int i = 0; i < 3; ++i) {
      const auto& p = *prompts[rng.below(prompts.size())];
      data.push_back({p, sample_response(spec, pol, p, rng.next())});
    }
    std::vector<double> g;
    mle_objective(spec, pol, data, &g);
    auto f = [&](const std::vector<double>& w) {
      return mle_objective(spec, PolicyParams{pol.spec_id, w}, data);
    };
    worst_mle = std::max(worst_mle, fd_rel_error(f, pol.weights, g, rng));
  }

  // Bradley-Terry loss of the reward model.
  const RewardFeaturizer rf(suite.vocab, 32);
  const auto pairs = synth_preferences(suite.open, suite.vocab, 32, 300, 5);
  double worst_bt = 0;
  for (int c = 0; c < kFdCases; ++c) {
    std::vector<RmFeatures> diffs;
    for (int i = 0; i < 8; ++i) {
      const auto& pr = pairs[rng.below(pairs.size())];
      const auto a = rf.features(pr.prompt, pr.chosen), b = rf.features(pr.prompt, pr.rejected);
      RmFeatures d{};
      for (int k = 0; k < kRmDim; ++k) d[static_cast<std::size_t>(k)] = a[static_cast<std::size_t>(k)] - b[static_cast<std::size_t>(k)];
      diffs.push_back(d);
    }
    std::vector<double> w(kRmDim), g(kRmDim);
    for (auto& x : w) x = rng.uniform(-2, 2);
    bt_loss(w, diffs, g);
    auto f = [&](const std::vector<double>& ww) { return bt_loss(ww, diffs); };
    worst_bt = std::max(worst_bt, fd_rel_error(f, w, g, rng));
  }
  const double secs = seconds_since(t0);
  const bool ok = worst_lp < kFdRelTol && worst_mle < kFdRelTol && worst_bt < kFdRelTol &&
                  secs < kFdSeconds;
  report("gradient-finite-differences", ok,
         std::to_string(kFdCases) + " cases each; max rel err logprob " + fmt("%.2e", worst_lp) +
             ", mle " + fmt("%.2e", worst_mle) + ", bt " + fmt("%.2e", worst_bt) + " (< " +
             fmt("%.0e", kFdRelTol) + "); " + fmt("%.1f", secs) + " s");
}

void advantage_check() {
  const std::vector<double> r{1, 0, 0, 1};
  const auto a = grpo_advantages(r, 1e-8);
  const double expect[4] = {1, -1, -1, 1};
  double err = 0;
  for (int i = 0; i < 4; ++i) err = std::max(err, std::abs(a[static_cast<std::size_t>(i)] - expect[i]));

  // Dyadic rewards and shift: every intermediate is exact.
  const std::vector<double> d{0.25, 1.5, -0.75, 2.0, 0.5, 0.5, -1.25, 3.0};
  auto shifted = d;
  for (auto& x : shifted) x += 8.0;
  const bool shift_exact = grpo_advantages(d, 1e-8) == grpo_advantages(shifted, 1e-8);

  // Random rewards, random shifts.
  Rng rng(9);
  double shift_err = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> x(2 + rng.below(15));
    for (auto& v : x) v = rng.uniform(-3, 3);
    auto y = x;
    const double c = rng.uniform(-5, 5);
    for (auto& v : y) v += c;
    const auto ax = grpo_advantages(x, 1e-8), ay = grpo_advantages(y, 1e-8);
    for (std::size_t i = 0; i < ax.size(); ++i) shift_err = std::max(shift_err, std::abs(ax[i] - ay[i]));
  }

  bool zeros = true;
  for (double v : {0.0, 1.0, -2.5, 0.3}) {
    const std::vector<double> same(6, v);
    for (double x : grpo_advantages(same, 1e-8)) zeros = zeros && x == 0.0;
  }
  const bool ok = err < kAdvTol && shift_exact && shift_err < 1e-9 && zeros;
  report("grpo-advantages", ok,
         "[1,0,0,1] -> [" + fmt("%.9f", a[0]) + "," + fmt("%.9f", a[1]) + "," + fmt("%.9f", a[2]) +
             "," + fmt("%.9f", a[3]) + "] err " + fmt("%.1e", err) + "; exact shift " +
             (shift_exact ? "yes" : "no") + ", random shift err " + fmt("%.1e", shift_err) +
             "; all-equal -> zeros " + (zeros ? "yes" : "no"));
}

void normalization_check() {
  const auto vocab = Vocabulary::from_surfaces({"<eos>", "<ans>", "<sec>", "a0"});
  const int max_len = 3;
  const FeatureSpec spec(vocab, max_len);
  std::vector<Prompt> prompts(2);
  prompts[0].id = "n-aspect";
  prompts[0].domain = std::string(domains::writing);
  prompts[0].kind = PromptKind::open;
  prompts[0].required_aspects = std::vector<std::string>{"a0"};
  prompts[1] = prompts[0];
  prompts[1].id = "n-plain";
  prompts[1].required_aspects.reset();

  // Every terminated sequence: non-<eos> prefix of length 0..max_len-1, then <eos>.
  std::vector<TokenSeq> all;
  std::function<void(TokenSeq)> grow = [&](TokenSeq s) {
    auto done = s;
    done.push_back(kEos);
    all.push_back(done);
    if (static_cast<int>(s.size()) + 1 >= max_len) return;
    for (TokenId t = 1; t < vocab.size(); ++t) {
      auto n = s;
      n.push_back(t);
      grow(n);
    }
  };
  grow({});

  double worst = 0;
  for (int k = 0; k < kNormPolicies; ++k) {
    InitOptions o{1.5, 0.0, 0.0, 0.0, 0.0, 0.0};
    const auto pol = init_policy(spec, 700 + static_cast<std::uint64_t>(k), o);
    for (const auto& p : prompts) {
      double total = 0;
      for (const auto& s : all) total += std::exp(sequence_logprob(spec, pol, p, s));
      worst = std::max(worst, std::abs(total - 1.0));
    }
  }
  report("distribution-normalization", worst < kNormTol,
         std::to_string(all.size()) + " sequences, " + std::to_string(kNormPolicies) +
             " policies x 2 prompts; max |sum - 1| " + fmt("%.2e", worst));
}

void kl_check() {
  const auto suite = generate_task_suite(3, {20, 10, 10, 20}, 64);
  const FeatureSpec spec(suite.vocab, 8);
  const auto prompts = all_prompts(suite);
  Rng rng(77);

  bool self_zero = true;
  for (int t = 0; t < 200; ++t) {
    const auto pol = random_policy(spec, 900 + static_cast<std::uint64_t>(t));
    const auto ref = ReferencePolicy::snapshot(pol);
    const auto& p = *prompts[rng.below(prompts.size())];
    const auto resp = sample_response(spec, pol, p, rng.next());
    const auto ctx = spec.context(p);
    StepState s;
    for (auto tok : resp) {
      self_zero = self_zero && exact_step_kl(spec, pol, ref, ctx, s) == 0.0;
      spec.advance(ctx, s, tok);
    }
  }

  double min_kl = INFINITY;
  for (int t = 0; t < kKlPairs; ++t) {
    InitOptions o{rng.uniform(0.1, 3.0), 0.0, 0.0, 0.0, 0.0, 0.0};
    const auto a = init_policy(spec, rng.next(), o);
    const auto b = init_policy(spec, rng.next(), o);
    const auto& p = *prompts[rng.below(prompts.size())];
    const auto prefix = sample_response(spec, a, p, rng.next());
    const std::span<const TokenId> pre(prefix.data(), rng.below(prefix.size()));
    min_kl = std::min(min_kl, exact_step_kl(spec, a, ReferencePolicy::snapshot(b), p, pre));
  }

  // Two-token world: a start bigram weight of ln 3 gives (0.75, 0.25).
  const auto v2 = Vocabulary::from_surfaces({"<eos>", "<ans>"});
  const FeatureSpec s2(v2, 3);
  auto pol = zero_policy(s2);
  pol.weights[static_cast<std::size_t>(s2.bigram_index(-1, kEos))] = std::log(3.0);
  Prompt p;
  p.id = "two";
  p.domain = std::string(domains::writing);
  p.kind = PromptKind::open;
  const auto dist = next_token_dist(s2, pol, p, {});
  const double kl = exact_step_kl(s2, pol, ReferencePolicy::snapshot(zero_policy(s2)), p, {});
  const double direct = kl_divergence(std::vector<double>{0.75, 0.25}, std::vector<double>{0.5, 0.5});
  const bool ok = self_zero && min_kl >= 0.0 && std::abs(kl - kKlTwoToken) < kKlTol &&
                  std::abs(direct - kKlTwoToken) < kKlTol && std::abs(dist[0] - 0.75) < 1e-12;
  report("kl-sanity", ok,
         std::string("KL(pi,pi) exactly 0: ") + (self_zero ? "yes" : "no") + "; min over " +
             std::to_string(kKlPairs) + " pairs " + fmt("%.3e", min_kl) + "; two-token " +
             fmt("%.6f", kl) + " (direct " + fmt("%.6f", direct) + ")");
}

void passk_check() {
  bool exact = true;
  int cases = 0;
  for (int n = 1; n <= kPassMaxN; ++n)
    for (int c = 0; c <= n; ++c)
      for (int k = 1; k <= n; ++k) {
        // Items 0..c-1 are correct; count k-subsets holding at least one.
        std::uint64_t total = 0, hit = 0;
        for (std::uint32_t m = 0; m < (1U << n); ++m) {
          if (std::popcount(m) != k) continue;
          ++total;
          if (m & ((1U << c) - 1)) ++hit;
        }
        const double want = static_cast<double>(hit) / static_cast<double>(total);
        exact = exact && pass_at_k(n, c, k) == want;
        ++cases;
      }
  const double a = pass_at_k(4, 1, 2), b = pass_at_k(10, 3, 5);
  const bool ok = exact && std::abs(a - 0.5) < kPassSpotTol && std::abs(b - 0.916667) < kPassSpotTol;
  report("pass-at-k-oracle", ok,
         std::to_string(cases) + " (n,c,k) cases " + (exact ? "exact" : "MISMATCH") +
             "; (4,1,2) = " + fmt("%.6f", a) + ", (10,3,5) = " + fmt("%.6f", b));
}

// grad log pi(a_t) computed from the feature map alone.
std::vector<double> oracle_score_gradient(const FeatureSpec& spec, const PolicyParams& pol,
                                          const Prompt& prompt, const TokenSeq& resp) {
  const auto ctx = spec.context(prompt);
  std::vector<double> g(static_cast<std::size_t>(spec.total_dim()), 0.0);
  StepState s;
  const int v = spec.vocab_size();
  for (std::size_t t = 0; t < resp.size(); ++t) {
    if (static_cast<int>(t) + 1 < spec.max_response_len()) {
      std::vector<FeatureList> fl(static_cast<std::size_t>(v));
      std::vector<double> z(static_cast<std::size_t>(v));
      double mx = -INFINITY;
      for (int c = 0; c < v; ++c) {
        spec.active_features(ctx, s, static_cast<TokenId>(c), fl[static_cast<std::size_t>(c)]);
        double sc = 0;
        for (int i : fl[static_cast<std::size_t>(c)].view()) sc += pol.weights[static_cast<std::size_t>(i)];
        z[static_cast<std::size_t>(c)] = sc;
        mx = std::max(mx, sc);
      }
      double norm = 0;
      for (auto& x : z) norm += (x = std::exp(x - mx));
      for (int c = 0; c < v; ++c)
        for (int i : fl[static_cast<std::size_t>(c)].view()) g[static_cast<std::size_t>(i)] -= z[static_cast<std::size_t>(c)] / norm;
      for (int i : fl[resp[t]].view()) g[static_cast<std::size_t>(i)] += 1.0;
    }
    spec.advance(ctx, s, resp[t]);
  }
  return g;
}

void ppo_degeneracy_check() {
  const auto suite = generate_task_suite(5, {20, 10, 10, 20}, 64);
  const FeatureSpec spec(suite.vocab, 12);
  TrainConfig cfg;
  cfg.kl_beta = 0;
  cfg.gae_gamma = 1;
  cfg.gae_lambda = 1;
  cfg.clip_epsilon = 0.2;
  cfg.ppo_passes = 1;
  cfg.max_resp_len = 12;
  Rng rng(31);
  double worst = 0;
  for (int t = 0; t < 20; ++t) {
    const auto& pool = t % 2 ? suite.open : suite.in_domain;
    const auto idx = rng.below(pool.size());
    const auto& p = pool.prompts[idx];
    const auto pol = random_policy(spec, 40 + static_cast<std::uint64_t>(t));
    Rollout r;
    r.prompt_id = p.id;
    r.prompt_index = idx;
    r.response = sample_response(spec, pol, p, rng.next());
    r.logprobs = step_logprobs(spec, pol, spec.context(p), r.response);
    r.kl.assign(r.response.size(), 0.0);
    r.reward = rng.uniform(-2, 2);
    auto critic = zero_value(spec);
    shape_rollout(spec, critic, p, cfg.kl_beta, cfg.gae_gamma, cfg.gae_lambda, r);
    auto updated = pol;
    ppo_update(spec, updated, critic, pool, std::vector<Rollout>{r}, cfg);
    const auto g = oracle_score_gradient(spec, pol, p, r.response);
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double want = pol.weights[j] + cfg.lr_actor * r.reward * g[j];
      worst = std::max(worst, std::abs(updated.weights[j] - want));
    }
  }

  // Freshly collected rollouts replayed against the policy that drew them.
  const auto pol = init_policy(spec, 3);
  const auto ref = ReferencePolicy::snapshot(pol);
  std::vector<std::size_t> idx(suite.in_domain.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  auto rollouts = collect_rollouts(spec, pol, ref, suite.in_domain, idx,
                                   RewardSource::from_verifier(VerifierKind::exact()), 17);
  auto critic = zero_value(spec);
  for (auto& r : rollouts)
    shape_rollout(spec, critic, suite.in_domain.prompts[r.prompt_index], 0.05, 1.0, 0.95, r);
  auto p2 = pol;
  const auto st = ppo_update(spec, p2, critic, suite.in_domain, rollouts, cfg);
  const bool ok = worst < kPpoTol && st.max_ratio_dev == 0.0;
  report("ppo-degeneracy", ok,
         "max |step - analytic| " + fmt("%.2e", worst) + " over 20 rollouts; max |ratio - 1| on " +
             std::to_string(rollouts.size()) + " fresh rollouts " + fmt("%.1e", st.max_ratio_dev));
}

void report_fidelity_check() {
  const char* names[] = {"b1", "b2", "b3", "b4", "b5"};
  const double base_rows[] = {73.6, 38.9, 6.1, 0.3, 1.6};
  const double sys_rows[] = {79.2, 47.0, 84.8, 58.9, 45.8};
  SystemScores base{"base", {}, {}}, sys{"system", {}, {}};
  for (int i = 0; i < 5; ++i) {
    base.scores.emplace_back(names[i], base_rows[i]);
    sys.scores.emplace_back(names[i], sys_rows[i]);
  }
  const auto rb = aggregate_report(base, base), rs = aggregate_report(sys, base);
  const auto a = display1(rb.average), b = display1(rs.average);
  report("report-fidelity", a == "24.1" && b == "63.1",
         "base average " + a + ", system average " + b + " (delta " + display_delta(rs.average_delta) + ")");
}

double score_of(const RunRecord& rec, const std::string& system, const std::string& bench) {
  for (const auto& r : rec.reports)
    if (r.system == system)
      for (const auto& row : r.rows)
        if (row.benchmark == bench) return row.score;
  throw std::runtime_error("no score for " + system + "/" + bench);
}

void ablation_check(const fs::path& root) {
  auto spec = default_spec();
  DriverOptions opt;
  opt.out = root / "ablation";
  opt.force = true;
  const auto t0 = std::chrono::steady_clock::now();
  const auto runs = run_all_seeds(&run_ablation, "ablate", spec, opt);
  const double secs = seconds_since(t0);
  int best = 0, improves = 0, in_domain_lower = 0;
  std::ostringstream detail;
  for (const auto& r : runs) {
    const double op = score_of(r, "open-PPO", "open-quality");
    double other = score_of(r, "base", "open-quality");
    for (const char* s : {"in-domain-PPO", "open-GRPO"}) other = std::max(other, score_of(r, s, "open-quality"));
    best += op >= other ? 1 : 0;
    improves += score_of(r, "open-PPO", "arith-hard") > score_of(r, "base", "arith-hard") ? 1 : 0;
    in_domain_lower += score_of(r, "in-domain-PPO", "open-quality") < op ? 1 : 0;
    detail << " s" << r.seed << "[oq " << display1(op) << " vs " << display1(other) << ", ah "
           << display1(score_of(r, "base", "arith-hard")) << "->"
           << display1(score_of(r, "open-PPO", "arith-hard")) << "]";
  }
  const bool ok = best >= kSeedsNeeded && improves >= kSeedsNeeded &&
                  in_domain_lower >= kSeedsNeeded && secs <= kAblationSeconds;
  report("ablation-directional", ok,
         "open-PPO best open-quality " + std::to_string(best) + "/5, beats base on arith-hard " +
             std::to_string(improves) + "/5, in-domain PPO lower on open-quality " +
             std::to_string(in_domain_lower) + "/5; " + fmt("%.1f", secs) + " s;" + detail.str());
}

void two_stage_check(const fs::path& root) {
  auto spec = default_spec();
  DriverOptions opt;
  opt.out = root / "two-stage";
  opt.force = true;
  const auto runs = run_all_seeds(&run_two_stage, "two-stage", spec, opt);
  int better = 0;
  std::ostringstream detail;
  for (const auto& r : runs) {
    const double s1 = score_of(r, "stage1", "arith-comp"), s2 = score_of(r, "stage2", "arith-comp");
    better += s2 > s1 ? 1 : 0;
    detail << " s" << r.seed << "[" << display1(s1) << "->" << display1(s2) << "]";
  }
  report("two-stage-directional", better >= kSeedsNeeded,
         "stage 2 beats stage 1 on arith-comp in " + std::to_string(better) + "/5 seeds;" + detail.str());
}

std::map<std::string, std::string> snapshot_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path());
  return out;
}

void reproducibility_check(const fs::path& root) {
  auto spec = default_spec();
  spec.seeds = {2};
  std::map<std::string, std::string> trees[3];
  const int threads[3] = {1, 4, 1};
  for (int i = 0; i < 3; ++i) {
    DriverOptions opt;
    opt.out = root / ("repro-" + std::to_string(i));
    opt.threads = threads[i];
    run_all_seeds(&run_ablation, "ablate", spec, opt);
    run_all_seeds(&run_two_stage, "two-stage", spec, opt);
    auto sweep = spec;
    sweep.sizes = {0, 25, 50};
    run_all_seeds(&run_data_scaling, "sweep-data", sweep, opt);
    trees[i] = snapshot_tree(opt.out);
  }
  std::string differ;
  for (int i = 1; i < 3; ++i)
    for (const auto& [name, text] : trees[0]) {
      auto it = trees[i].find(name);
      if (it == trees[i].end() || it->second != text) differ += " " + name;
    }
  const bool ok = differ.empty() && trees[0].size() == trees[1].size() &&
                  trees[0].size() == trees[2].size() && !trees[0].empty();
  report("reproducibility", ok,
         std::to_string(trees[0].size()) + " files compared across threads 1, 4 and a rerun" +
             (differ.empty() ? ", all byte-identical" : "; differing:" + differ));
}

}  // namespace

int main() {
  const auto root = fs::temp_directory_path() / ("tlab-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const std::vector<std::pair<const char*, std::function<void()>>> checks = {
      {"gradient-finite-differences", gradient_check},
      {"grpo-advantages", advantage_check},
      {"distribution-normalization", normalization_check},
      {"kl-sanity", kl_check},
      {"pass-at-k-oracle", passk_check},
      {"ppo-degeneracy", ppo_degeneracy_check},
      {"report-fidelity", report_fidelity_check},
      {"ablation-directional", [&] { ablation_check(root); }},
      {"two-stage-directional", [&] { two_stage_check(root); }},
      {"reproducibility", [&] { reproducibility_check(root); }},
  };
  for (const auto& [name, fn] : checks) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(name, false, std::string("threw: ") + e.what());
    }
  }
  fs::remove_all(root);
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed")
            << std::endl;
  return failures ? 1 : 0;
}
