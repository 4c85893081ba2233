#include <doctest.h>

#include <set>
#include <sstream>
#include <string>

#include "tlab/corpus.hpp"
#include "tlab/error.hpp"
#include "tlab/expr.hpp"
#include "tlab/rng.hpp"

using namespace tlab;

namespace {

std::string text_of(const Vocabulary& v, std::span<const TokenId> seq) {
  std::string s;
  for (auto t : seq) s += v.surface(t);
  return s;
}

const TaskSuite& suite() {
  static const TaskSuite s = generate_task_suite(7, TaskCounts{}, 64);
  return s;
}

}  // namespace

TEST_CASE("fnv-1a matches published vectors") {
  CHECK(hash_string("") == 0xcbf29ce484222325ULL);
  CHECK(hash_string("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hash_string("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("derived seeds depend on every part and its order") {
  const auto a = derive_seed(1, {2, 3});
  CHECK(a == derive_seed(1, {2, 3}));
  CHECK(a != derive_seed(1, {3, 2}));
  CHECK(a != derive_seed(2, {2, 3}));
  CHECK(a != derive_seed(1, {2, 3, 0}));
}

TEST_CASE("rng below stays in range and covers it") {
  Rng r(5);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto x = r.below(7);
    REQUIRE(x < 7);
    seen.insert(x);
  }
  CHECK(seen.size() == 7);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("standard vocabulary layout") {
  const auto v = Vocabulary::standard(64);
  CHECK(v.size() == 64);
  CHECK(v.surface(kEos) == "<eos>");
  CHECK(v.surface(kAnswerMarker) == "<ans>");
  REQUIRE(v.section());
  CHECK(v.surface(*v.section()) == "<sec>");
  for (int d = 0; d < 10; ++d) {
    REQUIRE(v.digit(d));
    CHECK(v.digit_value(*v.digit(d)) == d);
  }
  CHECK(v.aspects().size() == 8);
  CHECK(!v.fillers().empty());
  CHECK(!v.unsupported(TaskFamily::writing));
  std::set<std::string> uniq(v.surfaces().begin(), v.surfaces().end());
  CHECK(uniq.size() == v.surfaces().size());
}

TEST_CASE("hand-built vocabularies infer roles from surfaces") {
  const auto v = Vocabulary::from_surfaces({"<eos>", "<ans>", "<sec>", "a3", "x"});
  CHECK(v.section() == TokenId{2});
  CHECK(v.aspect_index(3) == 0);
  CHECK(v.aspect_index(4) == -1);
  CHECK(v.unsupported(TaskFamily::arithmetic).has_value());
  CHECK_THROWS_AS(Vocabulary::from_surfaces({"x", "<eos>", "<ans>"}), Error);
  const std::vector<std::string> bad{"nope"};
  CHECK_THROWS_AS(v.encode(bad), DataError);
}

TEST_CASE("task suite is a pure function of its seed") {
  const auto a = generate_task_suite(3, {20, 10, 10, 20}, 64);
  const auto b = generate_task_suite(3, {20, 10, 10, 20}, 64);
  const auto c = generate_task_suite(4, {20, 10, 10, 20}, 64);
  CHECK(a.open == b.open);
  CHECK(a.in_domain == b.in_domain);
  CHECK(a.benchmarks == b.benchmarks);
  CHECK(a.in_domain != c.in_domain);
}

TEST_CASE("pool sizes and invariants") {
  const auto& s = suite();
  CHECK(s.in_domain.size() == 200);
  CHECK(s.open.size() == 200);
  CHECK(s.transduce.size() == 200);
  for (const char* name : {"arith-hard", "arith-comp", "transduce", "open-quality"})
    REQUIRE(s.benchmarks.count(name) == 1);
  CHECK(s.benchmarks.at("arith-hard").size() == 100);
  CHECK(s.benchmarks.at("open-quality").size() == 100);
  for (const auto* p : {&s.open, &s.in_domain, &s.transduce}) CHECK_NOTHROW(p->validate(s.vocab, 16));
  for (const auto& [_, p] : s.benchmarks) CHECK_NOTHROW(p.validate(s.vocab, 16));
  CHECK(s.open.kind == PoolKind::open);
  CHECK(s.in_domain.kind == PoolKind::in_domain);
}

TEST_CASE("held-out prompts never appear in training pools") {
  const auto& s = suite();
  std::set<TokenSeq> train;
  for (const auto* p : {&s.open, &s.in_domain, &s.transduce})
    for (const auto& q : p->prompts) train.insert(q.tokens);
  for (const auto& [_, pool] : s.benchmarks)
    for (const auto& q : pool.prompts) CHECK(train.count(q.tokens) == 0);
}

TEST_CASE("arithmetic gold agrees with an exact rational evaluator") {
  const auto& s = suite();
  int checked = 0;
  for (const auto* pool : {&s.in_domain, &s.benchmarks.at("arith-hard"), &s.benchmarks.at("arith-comp")})
    for (const auto& p : pool->prompts) {
      auto expr = text_of(s.vocab, p.tokens);
      REQUIRE(expr.back() == '=');
      expr.pop_back();
      const auto value = evaluate_expression(expr);
      REQUIRE(value);
      REQUIRE(p.gold);
      CHECK(Rational(text_of(s.vocab, *p.gold)) == *value);
      CHECK(solve_task(p.domain, p.tokens, s.vocab) == p.gold);
      ++checked;
    }
  CHECK(checked == 400);
}

TEST_CASE("easy arithmetic: single-digit operands, answers in [0, 99]") {
  const auto& s = suite();
  for (const auto& p : s.in_domain.prompts) {
    const auto value = std::stoi(text_of(s.vocab, *p.gold));
    CHECK(value >= 0);
    CHECK(value <= 99);
    int run = 0;
    for (auto t : p.tokens) {
      run = s.vocab.digit_value(t) ? run + 1 : 0;
      CHECK(run <= 1);
    }
  }
}

TEST_CASE("composite arithmetic: two-digit first operand, mostly multi-digit answers") {
  const auto& s = suite();
  const auto& pool = s.benchmarks.at("arith-comp");
  int multi = 0;
  for (const auto& p : pool.prompts) {
    CHECK(s.vocab.digit_value(p.tokens[0]));
    CHECK(s.vocab.digit_value(p.tokens[1]));
    multi += p.gold->size() >= 2 ? 1 : 0;
  }
  CHECK(multi * 2 > static_cast<int>(pool.size()));
}

TEST_CASE("transduction gold: sorted digits or a verbatim copy") {
  const auto& s = suite();
  for (const auto& p : s.transduce.prompts) {
    TokenSeq digits(p.tokens.begin() + 1, p.tokens.end());
    CHECK(digits.size() >= 3);
    CHECK(digits.size() <= 5);
    if (p.domain == domains::sort) {
      std::vector<int> v;
      for (auto t : digits) v.push_back(*s.vocab.digit_value(t));
      std::sort(v.begin(), v.end());
      TokenSeq want;
      for (int d : v) want.push_back(*s.vocab.digit(d));
      CHECK(*p.gold == want);
    } else {
      CHECK(p.domain == domains::copy);
      CHECK(*p.gold == digits);
    }
  }
}

TEST_CASE("writing prompts: topic word, 2-4 required aspects present in the prompt") {
  const auto& s = suite();
  for (const auto& p : s.open.prompts) {
    REQUIRE(p.required_aspects);
    CHECK(p.required_aspects->size() >= 2);
    CHECK(p.required_aspects->size() <= 4);
    CHECK(!p.gold);
    for (const auto& a : *p.required_aspects)
      CHECK(std::find(p.tokens.begin(), p.tokens.end(), *s.vocab.find(a)) != p.tokens.end());
  }
}

TEST_CASE("solve_task rejects what it cannot parse") {
  const auto v = Vocabulary::standard(64);
  const TokenSeq no_equals{*v.digit(1), *v.op('+'), *v.digit(2)};
  CHECK(!solve_task(domains::arithmetic, no_equals, v));
  CHECK(!solve_task(domains::writing, no_equals, v));
  const TokenSeq wrong_cmd{*v.command("copy"), *v.digit(1)};
  CHECK(!solve_task(domains::sort, wrong_cmd, v));
}

TEST_CASE("prefix pools are nested") {
  const auto& s = suite();
  const auto a = s.in_domain.prefix(25), b = s.in_domain.prefix(50);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.prompts[i] == b.prompts[i]);
  CHECK(s.in_domain.prefix(0).empty());
  CHECK_THROWS_AS(s.in_domain.prefix(201), ConfigError);
}

TEST_CASE("prompt pools round-trip through JSONL") {
  const auto& s = suite();
  std::stringstream io;
  write_prompt_pool(io, s.open, s.vocab);
  CHECK(read_prompt_pool(io, s.vocab) == s.open);
  std::stringstream io2;
  write_prompt_pool(io2, s.in_domain, s.vocab);
  CHECK(read_prompt_pool(io2, s.vocab) == s.in_domain);
}

TEST_CASE("malformed prompt files name the line") {
  const auto v = Vocabulary::standard(64);
  std::stringstream io;
  io << "{\"pool\":\"p\",\"kind\":\"in_domain\"}\n{\"broken\n";
  try {
    read_prompt_pool(io, v);
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::stringstream dup;
  const auto& s = suite();
  write_prompt_pool(dup, s.in_domain.prefix(1), s.vocab);
  std::string text = dup.str();
  text += text.substr(text.find('\n') + 1);
  std::stringstream again(text);
  CHECK_THROWS_AS(read_prompt_pool(again, s.vocab), DataError);
}

TEST_CASE("validation catches broken prompts") {
  const auto& s = suite();
  auto pool = s.in_domain.prefix(2);
  pool.prompts[1].id = pool.prompts[0].id;
  CHECK_THROWS_AS(pool.validate(s.vocab, 16), DataError);
  pool = s.in_domain.prefix(1);
  pool.prompts[0].gold.reset();
  CHECK_THROWS_AS(pool.validate(s.vocab, 16), DataError);
  pool = s.open.prefix(1);
  pool.prompts[0].required_aspects = std::vector<std::string>{"a99"};
  CHECK_THROWS_AS(pool.validate(s.vocab, 16), DataError);
  pool = s.in_domain.prefix(1);
  CHECK_THROWS_AS(pool.validate(s.vocab, 2), DataError);
}

TEST_CASE("generation errors are configuration errors") {
  CHECK_THROWS_AS(generate_task_suite(1, {-1, 0, 0, 0}, 64), ConfigError);
  CHECK_THROWS_AS(generate_task_suite(1, {10, 0, 0, 0}, 16), ConfigError);
  CHECK_THROWS_AS(generate_task_suite(1, {100000, 0, 0, 0}, 64), ConfigError);
}

TEST_CASE("topic audit: shares add up and follow rule order") {
  const auto& s = suite();
  const auto rules = default_topic_rules();
  const auto shares = topic_audit(s.open, s.vocab, rules);
  int total = 0;
  double pct = 0;
  for (const auto& b : shares) {
    total += b.count;
    pct += b.percent;
  }
  CHECK(total == static_cast<int>(s.open.size()));
  CHECK(pct == doctest::Approx(100.0));
  const std::vector<TopicRule> only_star{{"*", "everything"}};
  const auto one = topic_audit(s.open, s.vocab, only_star);
  REQUIRE(one.size() == 1);
  CHECK(one[0].count == static_cast<int>(s.open.size()));
  const std::vector<TopicRule> no_star{{"policy", "x"}};
  CHECK_THROWS_AS(topic_audit(s.open, s.vocab, no_star), ConfigError);
}

TEST_CASE("topic audit matches a direct recount") {
  const auto& s = suite();
  const std::vector<TopicRule> rules{{"health", "health"}, {"write", "writing"}, {"*", "rest"}};
  int health = 0;
  for (const auto& p : s.open.prompts)
    for (auto t : p.tokens) health += s.vocab.surface(t) == "health" ? 1 : 0;
  const auto shares = topic_audit(s.open, s.vocab, rules);
  CHECK(shares[0].count == health);
  CHECK(shares[1].count == static_cast<int>(s.open.size()) - health);
  CHECK(shares[2].count == 0);
}
