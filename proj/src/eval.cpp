#include "tlab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tlab/error.hpp"
#include "tlab/parallel.hpp"
#include "tlab/rng.hpp"

namespace tlab {

namespace {

void check_scorer(const Benchmark& b) {
  if (b.pool.empty()) throw DataError("benchmark '" + b.name + "' has an empty pool");
  if (b.verifier.has_value() == b.judge.has_value())
    throw ConfigError("benchmark '" + b.name + "' needs exactly one scorer");
  for (const auto& p : b.pool.prompts) {
    if (b.verifier && p.kind != PromptKind::verifiable)
      throw ConfigError("benchmark '" + b.name + "': verifier cannot score open prompt '" + p.id + "'");
    if (b.judge && p.kind != PromptKind::open)
      throw ConfigError("benchmark '" + b.name + "': judge scores open prompts only, got '" + p.id + "'");
  }
  if (b.judge) {
    if (!b.judge->judge || !b.judge->featurizer)
      throw ConfigError("benchmark '" + b.name + "' has no judge model");
    if (b.judge->baseline.size() != b.pool.size())
      throw ConfigError("benchmark '" + b.name + "': baseline count differs from pool size");
  }
}

}  // namespace

BenchmarkResult run_benchmark(const FeatureSpec& spec, const PolicyParams& policy,
                              const Benchmark& bench, int threads) {
  check_compatible(spec, policy);
  check_scorer(bench);
  BenchmarkResult res;
  res.name = bench.name;
  const auto n = bench.pool.size();
  res.outcomes.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto& p = bench.pool.prompts[i];
    auto& o = res.outcomes[i];
    o.prompt_id = p.id;
    o.response = greedy_response(spec, policy, spec.context(p));
    if (bench.verifier) o.passed = verify(*bench.verifier, *p.gold, o.response, spec.vocab());
  });
  for (const auto& o : res.outcomes) res.lengths.push_back(static_cast<int>(o.response.size()));
  if (bench.verifier) {
    double total = 0;
    for (const auto& o : res.outcomes) total += o.passed;
    res.score = 100.0 * total / static_cast<double>(n);
  } else {
    std::vector<TokenSeq> cand;
    for (const auto& o : res.outcomes) cand.push_back(o.response);
    const auto& j = *bench.judge;
    const auto wr = lc_win_rate(bench.pool.prompts, cand, j.baseline, *j.judge, *j.featurizer);
    res.score = wr.percent;
    res.fallback = wr.fallback;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = rm_score(*j.judge, *j.featurizer, bench.pool.prompts[i], cand[i]);
      const double b = rm_score(*j.judge, *j.featurizer, bench.pool.prompts[i], j.baseline[i]);
      res.outcomes[i].passed = 1.0 / (1.0 + std::exp(b - a));
    }
  }
  return res;
}

namespace {

// Exact binomial when it fits in 64 bits.
std::optional<std::uint64_t> binom(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (int i = 0; i < k; ++i) {
    r = r * static_cast<unsigned>(n - i) / static_cast<unsigned>(i + 1);
    if (r > UINT64_MAX) return std::nullopt;
  }
  return static_cast<std::uint64_t>(r);
}

}  // namespace

double pass_at_k(int n, int c, int k) {
  if (n < 1 || c < 0 || c > n || k < 1 || k > n)
    throw ConfigError("pass@k needs 0 <= c <= n and 1 <= k <= n (got n=" + std::to_string(n) +
                      ", c=" + std::to_string(c) + ", k=" + std::to_string(k) + ")");
  if (c == 0) return 0.0;
  if (n - c < k) return 1.0;
  if (n <= 62) {
    const auto all = *binom(n, k), miss = *binom(n - c, k);
    return static_cast<double>(all - miss) / static_cast<double>(all);
  }
  double prod = 1.0;
  for (int i = n - c + 1; i <= n; ++i) prod *= 1.0 - static_cast<double>(k) / i;
  return 1.0 - prod;
}

PassKCurve pass_k_from_tallies(std::vector<std::pair<int, int>> tallies, std::span<const int> ks) {
  if (tallies.empty()) throw DataError("pass@k needs at least one prompt");
  PassKCurve c;
  c.tallies = std::move(tallies);
  c.ks.assign(ks.begin(), ks.end());
  for (int k : ks) {
    double total = 0;
    for (auto [n, cc] : c.tallies) total += pass_at_k(n, cc, k);
    c.estimates.push_back(total / static_cast<double>(c.tallies.size()));
  }
  return c;
}

PassKCurve pass_k_curve(const FeatureSpec& spec, const PolicyParams& policy,
                        const Benchmark& bench, int n, std::span<const int> ks, int threads) {
  check_compatible(spec, policy);
  check_scorer(bench);
  if (!bench.verifier) throw ConfigError("pass@k needs a verifier-scored benchmark");
  if (n < 1) throw ConfigError("n: must be >= 1");
  for (int k : ks)
    if (k < 1 || k > n) throw ConfigError("k: every k must lie in [1, n]");
  std::vector<std::pair<int, int>> tallies(bench.pool.size());
  parallel_for(tallies.size(), threads, [&](std::size_t i) {
    const auto& p = bench.pool.prompts[i];
    const auto ctx = spec.context(p);
    int c = 0;
    for (int s = 0; s < n; ++s) {
      const auto seed = derive_seed(bench.decode_seed, {hash_string(p.id), static_cast<std::uint64_t>(s)});
      c += verify(*bench.verifier, *p.gold, sample_response(spec, policy, ctx, seed), spec.vocab());
    }
    tallies[i] = {n, c};
  });
  return pass_k_from_tallies(std::move(tallies), ks);
}

std::string pass_k_csv(const PassKCurve& curve) {
  std::ostringstream o;
  o << "k,estimate\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.ks.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", curve.estimates[i]);
    o << curve.ks[i] << ',' << buf << '\n';
  }
  return o.str();
}

LengthStats length_stats(std::span<const int> lengths) {
  if (lengths.empty()) throw DataError("length statistics need at least one outcome");
  std::vector<int> v(lengths.begin(), lengths.end());
  std::sort(v.begin(), v.end());
  LengthStats s;
  double total = 0;
  for (int x : v) total += x;
  s.mean = total / static_cast<double>(v.size());
  const auto m = v.size();
  s.median = m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(m)));
  s.p90 = v[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

WinRate lc_win_rate(std::span<const Comparison> cs) {
  if (cs.empty()) throw DataError("win rate needs at least one comparison");
  const double n = static_cast<double>(cs.size());
  double raw = 0;
  bool all_same = true;
  for (const auto& c : cs) {
    raw += c.label;
    all_same = all_same && c.label == cs.front().label;
  }
  raw = 100.0 * raw / n;
  if (all_same) return {raw, true};

  // Ridge-penalized logistic regression of the label on
  // (1, score_diff, length_diff), fitted by Newton's method.
  constexpr double kRidge = 1e-2, kRidgeIntercept = 1e-6;
  const double pen[3] = {kRidgeIntercept, kRidge, kRidge};
  double b[3] = {0, 0, 0};
  for (int iter = 0; iter < 200; ++iter) {
    double g[3] = {0, 0, 0}, h[3][3] = {};
    for (const auto& c : cs) {
      const double x[3] = {1.0, c.score_diff, c.length_diff};
      const double z = b[0] + b[1] * x[1] + b[2] * x[2];
      const double p = 1.0 / (1.0 + std::exp(-z));
      for (int i = 0; i < 3; ++i) {
        g[i] += (c.label - p) * x[i];
        for (int j = 0; j < 3; ++j) h[i][j] += p * (1 - p) * x[i] * x[j];
      }
    }
    for (int i = 0; i < 3; ++i) {
      g[i] -= pen[i] * b[i];
      h[i][i] += pen[i];
    }
    // Solve h * d = g (3x3, Gaussian elimination with partial pivoting).
    double a[3][4];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) a[i][j] = h[i][j];
      a[i][3] = g[i];
    }
    for (int col = 0; col < 3; ++col) {
      int piv = col;
      for (int r = col + 1; r < 3; ++r)
        if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
      std::swap(a[col], a[piv]);
      for (int r = col + 1; r < 3; ++r) {
        const double f = a[r][col] / a[col][col];
        for (int j = col; j < 4; ++j) a[r][j] -= f * a[col][j];
      }
    }
    double d[3];
    for (int i = 2; i >= 0; --i) {
      double s = a[i][3];
      for (int j = i + 1; j < 3; ++j) s -= a[i][j] * d[j];
      d[i] = s / a[i][i];
    }
    double step = 0;
    for (int i = 0; i < 3; ++i) {
      b[i] += d[i];
      step = std::max(step, std::abs(d[i]));
    }
    if (!std::isfinite(step)) return {raw, true};
    if (step < 1e-12) break;
  }
  double total = 0;
  for (const auto& c : cs) total += 1.0 / (1.0 + std::exp(-(b[0] + b[1] * c.score_diff)));
  return {100.0 * total / n, false};
}

WinRate lc_win_rate(std::span<const Prompt> prompts, std::span<const TokenSeq> candidate,
                    std::span<const TokenSeq> baseline, const RewardModelParams& judge,
                    const RewardFeaturizer& f) {
  if (candidate.size() != prompts.size() || baseline.size() != prompts.size())
    throw ConfigError("win rate needs one candidate and one baseline response per prompt");
  std::vector<Comparison> cs;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const double a = rm_score(judge, f, prompts[i], candidate[i]);
    const double b = rm_score(judge, f, prompts[i], baseline[i]);
    Comparison c;
    // Bradley-Terry judge: preference probability from the full score gap.
    c.label = 1.0 / (1.0 + std::exp(b - a));
    c.score_diff = rm_content_score(judge, f, prompts[i], candidate[i]) -
                   rm_content_score(judge, f, prompts[i], baseline[i]);
    c.length_diff = static_cast<double>(candidate[i].size()) - static_cast<double>(baseline[i].size());
    cs.push_back(c);
  }
  return lc_win_rate(cs);
}

}  // namespace tlab
