#include "tlab/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tlab/error.hpp"
#include "tlab/io.hpp"
#include "tlab/rng.hpp"

namespace tlab {

using nlohmann::json;

std::string_view to_string(PromptKind k) { return k == PromptKind::open ? "open" : "verifiable"; }

std::string_view to_string(PoolKind k) {
  switch (k) {
    case PoolKind::open: return "open";
    case PoolKind::in_domain: return "in_domain";
    case PoolKind::mixed: return "mixed";
  }
  return "mixed";
}

PromptKind parse_prompt_kind(std::string_view s) {
  if (s == "open") return PromptKind::open;
  if (s == "verifiable") return PromptKind::verifiable;
  throw DataError("unknown prompt kind '" + std::string(s) + "'");
}

PoolKind parse_pool_kind(std::string_view s) {
  if (s == "open") return PoolKind::open;
  if (s == "in_domain") return PoolKind::in_domain;
  if (s == "mixed") return PoolKind::mixed;
  throw DataError("unknown pool kind '" + std::string(s) + "'");
}

namespace {

void check_prompt(const Prompt& p, const Vocabulary& vocab, int max_prompt_len) {
  if (p.id.empty()) throw DataError("prompt with empty id");
  if (static_cast<int>(p.tokens.size()) > max_prompt_len)
    throw DataError("prompt '" + p.id + "' longer than max prompt length " +
                    std::to_string(max_prompt_len));
  for (auto t : p.tokens)
    if (t >= vocab.size()) throw DataError("prompt '" + p.id + "' has out-of-vocabulary token");
  if (p.kind == PromptKind::verifiable) {
    if (!p.gold || p.gold->empty())
      throw DataError("verifiable prompt '" + p.id + "' has no gold answer");
    if (p.required_aspects)
      throw DataError("verifiable prompt '" + p.id + "' carries required_aspects");
  } else {
    if (p.gold) throw DataError("open prompt '" + p.id + "' carries a gold answer");
    if (!p.required_aspects)
      throw DataError("open prompt '" + p.id + "' has no required_aspects");
    for (const auto& a : *p.required_aspects) {
      auto id = vocab.find(a);
      if (!id || !vocab.is_aspect(*id))
        throw DataError("open prompt '" + p.id + "' requires unknown aspect '" + a + "'");
    }
  }
}

void check_pool_kind(const PromptPool& pool, const Prompt& p) {
  if (pool.kind == PoolKind::open && p.kind != PromptKind::open)
    throw DataError("open pool '" + pool.name + "' contains verifiable prompt '" + p.id + "'");
  if (pool.kind == PoolKind::in_domain && p.kind != PromptKind::verifiable)
    throw DataError("in_domain pool '" + pool.name + "' contains open prompt '" + p.id + "'");
}

// ---- arithmetic ----------------------------------------------------------

struct ArithTerm {
  std::vector<long long> numbers;
  std::vector<char> ops;
};

std::optional<long long> eval_arith(std::span<const TokenId> tokens, const Vocabulary& vocab) {
  ArithTerm expr;
  long long current = 0;
  bool in_number = false;
  bool saw_equals = false;
  for (auto t : tokens) {
    if (saw_equals) return std::nullopt;
    if (auto d = vocab.digit_value(t)) {
      current = current * 10 + *d;
      in_number = true;
      continue;
    }
    const std::string& s = vocab.surface(t);
    if (!in_number || s.size() != 1) return std::nullopt;
    expr.numbers.push_back(current);
    current = 0;
    in_number = false;
    if (s == "=") {
      saw_equals = true;
    } else if (s == "+" || s == "-" || s == "*") {
      expr.ops.push_back(s[0]);
    } else {
      return std::nullopt;
    }
  }
  if (!saw_equals || expr.numbers.size() != expr.ops.size() + 1) return std::nullopt;
  // Fold products first, then the additive chain left to right.
  std::vector<long long> terms{expr.numbers[0]};
  std::vector<char> adds;
  for (std::size_t i = 0; i < expr.ops.size(); ++i) {
    if (expr.ops[i] == '*') {
      terms.back() *= expr.numbers[i + 1];
    } else {
      adds.push_back(expr.ops[i]);
      terms.push_back(expr.numbers[i + 1]);
    }
  }
  long long value = terms[0];
  for (std::size_t i = 0; i < adds.size(); ++i)
    value = adds[i] == '+' ? value + terms[i + 1] : value - terms[i + 1];
  return value;
}

TokenSeq encode_number(long long v, const Vocabulary& vocab) {
  TokenSeq out;
  if (v < 0) {
    out.push_back(*vocab.op('-'));
    v = -v;
  }
  for (char c : std::to_string(v)) out.push_back(*vocab.digit(c - '0'));
  return out;
}

TokenSeq arith_prompt(const std::vector<int>& numbers, const std::vector<char>& ops,
                      const Vocabulary& vocab) {
  TokenSeq out;
  for (std::size_t i = 0; i < numbers.size(); ++i) {
    for (char c : std::to_string(numbers[i])) out.push_back(*vocab.digit(c - '0'));
    if (i < ops.size()) out.push_back(*vocab.op(ops[i]));
  }
  out.push_back(*vocab.op('='));
  return out;
}

// Single-digit operands, two or three of them, value in [0, 99].
TokenSeq draw_easy_arith(Rng& rng, const Vocabulary& vocab) {
  static constexpr char kOps[] = {'+', '-', '*'};
  for (;;) {
    const int n = 2 + static_cast<int>(rng.below(2));
    std::vector<int> numbers;
    std::vector<char> ops;
    for (int i = 0; i < n; ++i) {
      numbers.push_back(static_cast<int>(rng.below(10)));
      if (i + 1 < n) ops.push_back(kOps[rng.below(3)]);
    }
    TokenSeq tokens = arith_prompt(numbers, ops, vocab);
    auto v = eval_arith(tokens, vocab);
    if (v && *v >= 0 && *v <= 99) return tokens;
  }
}

// Two-digit operands with multi-digit answers.
TokenSeq draw_comp_arith(Rng& rng, const Vocabulary& vocab) {
  const auto kind = rng.below(3);
  const int a = 10 + static_cast<int>(rng.below(90));
  if (kind == 0) return arith_prompt({a, 10 + static_cast<int>(rng.below(90))}, {'+'}, vocab);
  if (kind == 1)
    return arith_prompt({a, 10 + static_cast<int>(rng.below(static_cast<std::uint64_t>(a - 9)))},
                        {'-'}, vocab);
  return arith_prompt({a, 2 + static_cast<int>(rng.below(8))}, {'*'}, vocab);
}

TokenSeq draw_transduce(Rng& rng, const Vocabulary& vocab, std::string_view command) {
  TokenSeq out{*vocab.command(command)};
  const int n = 3 + static_cast<int>(rng.below(3));
  for (int i = 0; i < n; ++i) out.push_back(*vocab.digit(static_cast<int>(rng.below(10))));
  return out;
}

struct WritingDraw {
  TokenSeq tokens;
  std::vector<std::string> aspects;
};

WritingDraw draw_writing(Rng& rng, const Vocabulary& vocab) {
  const auto& groups = topic_groups();
  double total = 0;
  for (const auto& g : groups) total += g.weight;
  double u = rng.uniform() * total;
  const TopicGroup* group = &groups.back();
  for (const auto& g : groups) {
    if (u < g.weight) {
      group = &g;
      break;
    }
    u -= g.weight;
  }
  const auto word = group->words[rng.below(group->words.size())];
  WritingDraw d;
  d.tokens.push_back(*vocab.command("write"));
  d.tokens.push_back(*vocab.find(word));
  std::vector<TokenId> pool = vocab.aspects();
  const int k = 2 + static_cast<int>(rng.below(3));
  for (int i = 0; i < k; ++i) {
    const auto j = i + rng.below(pool.size() - static_cast<std::size_t>(i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    d.tokens.push_back(pool[static_cast<std::size_t>(i)]);
    d.aspects.push_back(vocab.surface(pool[static_cast<std::size_t>(i)]));
  }
  return d;
}

std::string make_id(std::string_view prefix, int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05d", index);
  return std::string(prefix) + "-" + buf;
}

// Draws `total` distinct prompts of one family. A long run of duplicate
// draws means the task space is exhausted: that is a configuration error.
template <typename Draw>
std::vector<Prompt> draw_distinct(int total, std::string_view family, Draw&& draw,
                                  std::set<TokenSeq>& seen) {
  constexpr int kMaxMisses = 20000;
  std::vector<Prompt> out;
  int misses = 0;
  while (static_cast<int>(out.size()) < total) {
    Prompt p = draw();
    if (!seen.insert(p.tokens).second) {
      if (++misses > kMaxMisses)
        throw ConfigError("cannot generate " + std::to_string(total) + " distinct " +
                          std::string(family) + " prompts (got " + std::to_string(out.size()) + ")");
      continue;
    }
    misses = 0;
    out.push_back(std::move(p));
  }
  return out;
}

void require_family(const Vocabulary& vocab, TaskFamily f) {
  if (auto missing = vocab.unsupported(f))
    throw ConfigError("vocabulary of size " + std::to_string(vocab.size()) +
                      " cannot encode task family '" + *missing + "'");
}

PromptPool make_pool(std::string name, PoolKind kind, std::string provenance) {
  PromptPool p;
  p.name = std::move(name);
  p.kind = kind;
  p.provenance = std::move(provenance);
  return p;
}

void assign_ids(std::vector<Prompt>& prompts, std::string_view prefix) {
  for (std::size_t i = 0; i < prompts.size(); ++i)
    prompts[i].id = make_id(prefix, static_cast<int>(i));
}

}  // namespace

void PromptPool::validate(const Vocabulary& vocab, int max_prompt_len) const {
  std::set<std::string> ids;
  for (const auto& p : prompts) {
    check_prompt(p, vocab, max_prompt_len);
    check_pool_kind(*this, p);
    if (!ids.insert(p.id).second) throw DataError("duplicate prompt id '" + p.id + "'");
  }
}

PromptPool PromptPool::prefix(std::size_t n) const {
  if (n > prompts.size())
    throw ConfigError("requested " + std::to_string(n) + " prompts from pool '" + name +
                      "' of size " + std::to_string(prompts.size()));
  PromptPool out = *this;
  out.prompts.resize(n);
  return out;
}

std::optional<TokenSeq> solve_task(std::string_view domain, std::span<const TokenId> prompt,
                                   const Vocabulary& vocab) {
  if (domain == domains::arithmetic) {
    auto v = eval_arith(prompt, vocab);
    if (!v) return std::nullopt;
    return encode_number(*v, vocab);
  }
  if (domain == domains::sort || domain == domains::copy) {
    if (prompt.size() < 2 || prompt[0] != vocab.command(domain)) return std::nullopt;
    TokenSeq out(prompt.begin() + 1, prompt.end());
    if (domain == domains::sort) {
      // Order by digit value, not by token id.
      for (auto t : out)
        if (!vocab.digit_value(t)) return std::nullopt;
      std::stable_sort(out.begin(), out.end(), [&](TokenId a, TokenId b) {
        return *vocab.digit_value(a) < *vocab.digit_value(b);
      });
    }
    return out;
  }
  return std::nullopt;
}

TaskSuite generate_task_suite(std::uint64_t seed, const TaskCounts& counts, int vocab_size,
                              int max_prompt_len) {
  for (int c : {counts.arithmetic, counts.sort, counts.copy, counts.writing})
    if (c < 0) throw ConfigError("task counts must be non-negative");
  if (max_prompt_len < 6) throw ConfigError("max_prompt_len must be at least 6");
  TaskSuite suite{Vocabulary::standard(vocab_size), {}, {}, {}, {}};
  const Vocabulary& vocab = suite.vocab;
  if (counts.arithmetic > 0) require_family(vocab, TaskFamily::arithmetic);
  if (counts.sort > 0) require_family(vocab, TaskFamily::sort);
  if (counts.copy > 0) require_family(vocab, TaskFamily::copy);
  if (counts.writing > 0) require_family(vocab, TaskFamily::writing);

  const std::string prov = "synthetic suite, seed " + std::to_string(seed);
  suite.open = make_pool("open", PoolKind::open, prov);
  suite.in_domain = make_pool("in_domain", PoolKind::in_domain, prov);
  suite.transduce = make_pool("transduce-train", PoolKind::in_domain, prov);
  auto bench_arith = make_pool("arith-hard", PoolKind::in_domain, prov);
  auto bench_comp = make_pool("arith-comp", PoolKind::in_domain, prov);
  auto bench_trans = make_pool("transduce", PoolKind::in_domain, prov);
  auto bench_open = make_pool("open-quality", PoolKind::open, prov);

  auto verifiable = [&](std::string_view domain, TokenSeq tokens) {
    Prompt p;
    p.domain = std::string(domain);
    p.kind = PromptKind::verifiable;
    p.gold = solve_task(domain, tokens, vocab);
    p.tokens = std::move(tokens);
    return p;
  };

  auto split = [](std::vector<Prompt> all, int train, std::vector<Prompt>& train_out,
                  std::vector<Prompt>& held_out) {
    train_out.assign(std::make_move_iterator(all.begin()),
                     std::make_move_iterator(all.begin() + train));
    held_out.assign(std::make_move_iterator(all.begin() + train),
                    std::make_move_iterator(all.end()));
  };

  if (counts.arithmetic > 0) {
    Rng rng(derive_seed(seed, {hash_string("arithmetic")}));
    std::set<TokenSeq> seen;
    const int held = counts.arithmetic / 2;
    auto all = draw_distinct(counts.arithmetic + held, "arithmetic", [&] {
      return verifiable(domains::arithmetic, draw_easy_arith(rng, vocab));
    }, seen);
    std::vector<Prompt> train, test;
    split(std::move(all), counts.arithmetic, train, test);
    assign_ids(train, "arith");
    assign_ids(test, "arith-ho");
    suite.in_domain.prompts = std::move(train);
    bench_arith.prompts = std::move(test);

    Rng comp_rng(derive_seed(seed, {hash_string("arithmetic-comp")}));
    auto comp = draw_distinct(held, "arithmetic", [&] {
      return verifiable(domains::arithmetic, draw_comp_arith(comp_rng, vocab));
    }, seen);
    assign_ids(comp, "arith-comp");
    bench_comp.prompts = std::move(comp);
  }

  for (auto family : {domains::sort, domains::copy}) {
    const int count = family == domains::sort ? counts.sort : counts.copy;
    if (count <= 0) continue;
    Rng rng(derive_seed(seed, {hash_string(family)}));
    std::set<TokenSeq> seen;
    const int held = count / 2;
    auto all = draw_distinct(count + held, family, [&] {
      return verifiable(family, draw_transduce(rng, vocab, family));
    }, seen);
    std::vector<Prompt> train, test;
    split(std::move(all), count, train, test);
    assign_ids(train, family);
    assign_ids(test, std::string(family) + "-ho");
    for (auto& p : train) suite.transduce.prompts.push_back(std::move(p));
    for (auto& p : test) bench_trans.prompts.push_back(std::move(p));
  }

  if (counts.writing > 0) {
    Rng rng(derive_seed(seed, {hash_string("writing")}));
    std::set<TokenSeq> seen;
    const int held = counts.writing / 2;
    auto all = draw_distinct(counts.writing + held, "writing", [&] {
      auto d = draw_writing(rng, vocab);
      Prompt p;
      p.domain = std::string(domains::writing);
      p.kind = PromptKind::open;
      p.tokens = std::move(d.tokens);
      p.required_aspects = std::move(d.aspects);
      return p;
    }, seen);
    std::vector<Prompt> train, test;
    split(std::move(all), counts.writing, train, test);
    assign_ids(train, "write");
    assign_ids(test, "write-ho");
    suite.open.prompts = std::move(train);
    bench_open.prompts = std::move(test);
  }

  for (auto* pool : {&suite.open, &suite.in_domain, &suite.transduce, &bench_arith, &bench_comp,
                     &bench_trans, &bench_open})
    pool->validate(vocab, max_prompt_len);
  suite.benchmarks.emplace(bench_arith.name, std::move(bench_arith));
  suite.benchmarks.emplace(bench_comp.name, std::move(bench_comp));
  suite.benchmarks.emplace(bench_trans.name, std::move(bench_trans));
  suite.benchmarks.emplace(bench_open.name, std::move(bench_open));
  return suite;
}

// ---- JSONL persistence ---------------------------------------------------

namespace {

json surfaces_json(std::span<const TokenId> seq, const Vocabulary& vocab) {
  json arr = json::array();
  for (auto t : seq) arr.push_back(vocab.surface(t));
  return arr;
}

TokenSeq parse_surfaces(const json& arr, const Vocabulary& vocab, const char* field) {
  if (!arr.is_array()) throw DataError(std::string("field '") + field + "' must be an array");
  std::vector<std::string> s;
  for (const auto& e : arr) {
    if (!e.is_string()) throw DataError(std::string("field '") + field + "' must hold strings");
    s.push_back(e.get<std::string>());
  }
  return vocab.encode(s);
}

}  // namespace

void write_prompt_pool(std::ostream& out, const PromptPool& pool, const Vocabulary& vocab) {
  json header = {{"pool", pool.name}, {"kind", to_string(pool.kind)}};
  if (!pool.provenance.empty()) header["provenance"] = pool.provenance;
  out << header.dump() << '\n';
  for (const auto& p : pool.prompts) {
    json rec = {{"id", p.id},
                {"domain", p.domain},
                {"kind", to_string(p.kind)},
                {"prompt", surfaces_json(p.tokens, vocab)}};
    if (p.gold) rec["gold"] = surfaces_json(*p.gold, vocab);
    if (p.required_aspects) rec["required_aspects"] = *p.required_aspects;
    out << rec.dump() << '\n';
  }
}

PromptPool read_prompt_pool(std::istream& in, const Vocabulary& vocab, int max_prompt_len) {
  PromptPool pool;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    try {
      json rec = json::parse(line);
      if (!rec.is_object()) throw DataError("record is not an object");
      if (!have_header) {
        if (!rec.contains("pool") || !rec.contains("kind"))
          throw DataError("missing header record {\"pool\", \"kind\"}");
        pool.name = rec.at("pool").get<std::string>();
        pool.kind = parse_pool_kind(rec.at("kind").get<std::string>());
        pool.provenance = rec.value("provenance", std::string());
        have_header = true;
        continue;
      }
      for (const auto& [key, _] : rec.items()) {
        static const std::set<std::string> known = {"id",     "domain", "kind",
                                                    "prompt", "gold",   "required_aspects"};
        if (!known.contains(key)) throw DataError("unknown field '" + key + "'");
      }
      Prompt p;
      p.id = rec.at("id").get<std::string>();
      p.domain = rec.at("domain").get<std::string>();
      p.kind = parse_prompt_kind(rec.at("kind").get<std::string>());
      p.tokens = parse_surfaces(rec.at("prompt"), vocab, "prompt");
      if (rec.contains("gold")) p.gold = parse_surfaces(rec.at("gold"), vocab, "gold");
      if (rec.contains("required_aspects"))
        p.required_aspects = rec.at("required_aspects").get<std::vector<std::string>>();
      check_prompt(p, vocab, max_prompt_len);
      check_pool_kind(pool, p);
      if (!ids.insert(p.id).second) throw DataError("duplicate prompt id '" + p.id + "'");
      pool.prompts.push_back(std::move(p));
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    } catch (const json::exception& e) {
      throw DataError(where + "malformed record: " + e.what());
    }
  }
  if (!have_header) throw DataError("prompt file has no header record");
  return pool;
}

void save_prompt_pool(const std::filesystem::path& path, const PromptPool& pool,
                      const Vocabulary& vocab) {
  std::ostringstream out;
  write_prompt_pool(out, pool, vocab);
  write_file_atomic(path, out.str());
}

PromptPool load_prompt_pool(const std::filesystem::path& path, const Vocabulary& vocab,
                            int max_prompt_len) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open prompt file " + path.string());
  try {
    return read_prompt_pool(in, vocab, max_prompt_len);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// ---- topic audit ---------------------------------------------------------

std::vector<TopicRule> default_topic_rules() {
  std::vector<TopicRule> rules;
  for (const auto& g : topic_groups()) {
    if (g.bucket == "general analysis") continue;
    for (auto w : g.words) rules.push_back({std::string(w), std::string(g.bucket)});
  }
  rules.push_back({"*", "general analysis"});
  return rules;
}

std::vector<TopicRule> load_topic_rules(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open rules file " + path.string());
  std::vector<TopicRule> rules;
  try {
    json arr = json::parse(in);
    if (!arr.is_array()) throw DataError("rules file must hold an array");
    for (const auto& r : arr)
      rules.push_back({r.at("keyword").get<std::string>(), r.at("bucket").get<std::string>()});
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed rules: " + e.what());
  }
  return rules;
}

std::vector<BucketShare> topic_audit(const PromptPool& pool, const Vocabulary& vocab,
                                     std::span<const TopicRule> rules) {
  if (rules.empty()) throw ConfigError("topic audit needs at least one rule");
  if (std::none_of(rules.begin(), rules.end(), [](const TopicRule& r) { return r.keyword == "*"; }))
    throw ConfigError("topic audit rules need a catch-all \"*\" rule");
  std::vector<BucketShare> shares;
  std::vector<std::size_t> rule_bucket;
  for (const auto& r : rules) {
    auto it = std::find_if(shares.begin(), shares.end(),
                           [&](const BucketShare& b) { return b.bucket == r.bucket; });
    if (it == shares.end()) {
      shares.push_back({r.bucket, 0, 0.0});
      it = shares.end() - 1;
    }
    rule_bucket.push_back(static_cast<std::size_t>(it - shares.begin()));
  }
  for (const auto& p : pool.prompts) {
    for (std::size_t r = 0; r < rules.size(); ++r) {
      const auto& kw = rules[r].keyword;
      bool hit = kw == "*" || kw == p.domain ||
                 std::any_of(p.tokens.begin(), p.tokens.end(),
                             [&](TokenId t) { return vocab.surface(t) == kw; });
      if (hit) {
        ++shares[rule_bucket[r]].count;
        break;
      }
    }
  }
  if (!pool.prompts.empty())
    for (auto& s : shares)
      s.percent = 100.0 * s.count / static_cast<double>(pool.prompts.size());
  return shares;
}

}  // namespace tlab
