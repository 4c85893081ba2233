#include "tlab/preferences.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tlab/error.hpp"
#include "tlab/features.hpp"
#include "tlab/io.hpp"
#include "tlab/rng.hpp"

namespace tlab {

int rubric_criteria(const Vocabulary& vocab, int max_response_len, const Prompt& prompt,
                    std::span<const TokenId> response) {
  const auto s = response_shape(vocab, max_response_len, prompt, response);
  int n = 0;
  n += s.terminated ? 1 : 0;
  n += s.disciplined ? 1 : 0;
  n += s.covered;
  n += (s.sections > 0 && s.sections_with_aspect == s.sections) ? 1 : 0;
  n += s.extraneous == 0 ? 1 : 0;
  return n;
}

namespace {

struct Profile {
  bool terminated;
  bool disciplined;
  bool sectioned;
  bool extraneous;
  std::uint32_t subset;
};

std::vector<TokenId> required_ids(const Vocabulary& vocab, const Prompt& prompt) {
  std::vector<TokenId> ids;
  if (prompt.required_aspects)
    for (const auto& a : *prompt.required_aspects) ids.push_back(*vocab.find(a));
  return ids;
}

TokenSeq render(const Vocabulary& vocab, int max_len, const Prompt& prompt, const Profile& p) {
  const auto req = required_ids(vocab, prompt);
  const auto& fillers = vocab.fillers();
  if (fillers.empty()) throw ConfigError("vocabulary has no filler tokens");
  const std::uint64_t h = hash_string(prompt.id);
  const TokenId f1 = fillers[h % fillers.size()];
  const TokenId f2 = fillers[(h / 7 + 1) % fillers.size()];
  const TokenId f3 = summary_token(vocab, prompt).value_or(fillers[(h / 49 + 2) % fillers.size()]);
  TokenId extra = kEos;
  for (auto a : vocab.aspects())
    if (std::find(req.begin(), req.end(), a) == req.end()) {
      extra = a;
      break;
    }

  TokenSeq body;
  bool any = false;
  for (std::size_t i = 0; i < req.size(); ++i) {
    if (!(p.subset >> i & 1U)) continue;
    any = true;
    if (p.sectioned) body.push_back(*vocab.section());
    body.push_back(req[i]);
    body.push_back(f1);
  }
  if (!any) {
    if (p.sectioned) body.push_back(*vocab.section());
    body.push_back(f1);
    if (!p.sectioned) body.push_back(f2);
  }
  if (p.extraneous && extra != kEos) {
    body.push_back(extra);
    body.push_back(f2);
  }
  if (p.disciplined) {
    body.push_back(kAnswerMarker);
    body.push_back(f3);
  }
  const auto cap = static_cast<std::size_t>(max_len - 1);
  if (body.size() > cap) body.resize(cap);
  if (!p.terminated)
    while (body.size() < cap) body.push_back(f2);
  body.push_back(kEos);
  return body;
}

}  // namespace

std::vector<TokenSeq> response_catalog(const Vocabulary& vocab, int max_response_len,
                                       const Prompt& prompt) {
  if (prompt.kind != PromptKind::open) throw ConfigError("response catalog needs an open prompt");
  const auto k = required_ids(vocab, prompt).size();
  std::vector<TokenSeq> out;
  std::set<TokenSeq> seen;
  for (std::uint32_t subset = 0; subset < (1U << k); ++subset)
    for (int bits = 0; bits < 16; ++bits) {
      Profile p{(bits & 1) != 0, (bits & 2) != 0, (bits & 4) != 0, (bits & 8) != 0, subset};
      auto r = render(vocab, max_response_len, prompt, p);
      if (seen.insert(r).second) out.push_back(std::move(r));
    }
  return out;
}

TokenSeq reference_response(const Vocabulary& vocab, int max_response_len, const Prompt& prompt) {
  const auto k = required_ids(vocab, prompt).size();
  return render(vocab, max_response_len, prompt, {true, true, false, false, (1U << k) - 1});
}

namespace {

struct Catalog {
  std::vector<TokenSeq> responses;
  std::vector<int> criteria;
  std::uint64_t strict_pairs = 0;
};

Catalog build_catalog(const Vocabulary& vocab, int max_len, const Prompt& prompt) {
  Catalog c;
  c.responses = response_catalog(vocab, max_len, prompt);
  std::map<int, std::uint64_t> hist;
  for (const auto& r : c.responses) {
    c.criteria.push_back(rubric_criteria(vocab, max_len, prompt, r));
    ++hist[c.criteria.back()];
  }
  const std::uint64_t m = c.responses.size();
  c.strict_pairs = m * (m - 1) / 2;
  for (auto [_, n] : hist) c.strict_pairs -= n * (n - 1) / 2;
  return c;
}

void check_open_pool(const PromptPool& pool) {
  if (pool.kind != PoolKind::open)
    throw ConfigError("preference synthesis needs an open pool, got '" + pool.name + "'");
}

}  // namespace

std::uint64_t distinct_pair_count(const Vocabulary& vocab, int max_response_len,
                                  const PromptPool& pool) {
  check_open_pool(pool);
  std::uint64_t total = 0;
  for (const auto& p : pool.prompts) total += build_catalog(vocab, max_response_len, p).strict_pairs;
  return total;
}

std::vector<PreferencePair> synth_preferences(const PromptPool& pool, const Vocabulary& vocab,
                                              int max_response_len, int n, std::uint64_t seed) {
  check_open_pool(pool);
  if (n < 0) throw ConfigError("number of preference pairs must be non-negative");
  if (n == 0) return {};
  std::vector<Catalog> catalogs;
  std::uint64_t total = 0;
  for (const auto& p : pool.prompts) {
    catalogs.push_back(build_catalog(vocab, max_response_len, p));
    total += catalogs.back().strict_pairs;
  }
  if (static_cast<std::uint64_t>(n) > total)
    throw ConfigError("requested " + std::to_string(n) + " preference pairs but only " +
                      std::to_string(total) + " distinct strict pairs exist");

  struct Key {
    std::size_t prompt, a, b;
    auto operator<=>(const Key&) const = default;
  };
  std::vector<Key> keys;
  Rng rng(seed);
  if (static_cast<std::uint64_t>(n) * 2 <= total) {
    std::set<Key> taken;
    while (keys.size() < static_cast<std::size_t>(n)) {
      const auto pi = rng.below(catalogs.size());
      const auto& c = catalogs[pi];
      const auto m = c.responses.size();
      if (m < 2) continue;
      auto a = rng.below(m), b = rng.below(m);
      if (a == b || c.criteria[a] == c.criteria[b]) continue;
      if (a > b) std::swap(a, b);
      if (taken.insert({pi, a, b}).second) keys.push_back({pi, a, b});
    }
  } else {
    for (std::size_t pi = 0; pi < catalogs.size(); ++pi) {
      const auto& c = catalogs[pi];
      for (std::size_t a = 0; a < c.responses.size(); ++a)
        for (std::size_t b = a + 1; b < c.responses.size(); ++b)
          if (c.criteria[a] != c.criteria[b]) keys.push_back({pi, a, b});
    }
    rng.shuffle(keys.begin(), keys.end());
    keys.resize(static_cast<std::size_t>(n));
  }

  std::vector<PreferencePair> out;
  out.reserve(keys.size());
  for (const auto& k : keys) {
    const auto& c = catalogs[k.prompt];
    const bool a_wins = c.criteria[k.a] > c.criteria[k.b];
    out.push_back({pool.prompts[k.prompt], c.responses[a_wins ? k.a : k.b],
                   c.responses[a_wins ? k.b : k.a], "rubric-synth"});
  }
  return out;
}

void save_preferences(const std::filesystem::path& path, std::span<const PreferencePair> pairs,
                      const Vocabulary& vocab) {
  std::ostringstream out;
  auto surf = [&](const TokenSeq& s) {
    nlohmann::json a = nlohmann::json::array();
    for (auto t : s) a.push_back(vocab.surface(t));
    return a;
  };
  for (const auto& p : pairs) {
    nlohmann::json rec = {{"prompt_id", p.prompt.id},
                          {"chosen", surf(p.chosen)},
                          {"rejected", surf(p.rejected)},
                          {"source", p.source}};
    out << rec.dump() << '\n';
  }
  write_file_atomic(path, out.str());
}

std::vector<PreferencePair> load_preferences(const std::filesystem::path& path,
                                             const PromptPool& pool, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open preference file " + path.string());
  std::map<std::string, const Prompt*> by_id;
  for (const auto& p : pool.prompts) by_id[p.id] = &p;
  std::vector<PreferencePair> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ": line " + std::to_string(line_no) + ": ";
    try {
      auto rec = nlohmann::json::parse(line);
      const auto id = rec.at("prompt_id").get<std::string>();
      auto it = by_id.find(id);
      if (it == by_id.end()) throw DataError("unknown prompt id '" + id + "'");
      PreferencePair p;
      p.prompt = *it->second;
      p.chosen = vocab.encode(rec.at("chosen").get<std::vector<std::string>>());
      p.rejected = vocab.encode(rec.at("rejected").get<std::vector<std::string>>());
      p.source = rec.value("source", std::string());
      if (p.chosen == p.rejected) throw DataError("chosen equals rejected");
      for (const auto* r : {&p.chosen, &p.rejected})
        if (r->empty() || r->back() != kEos) throw DataError("response is not terminated");
      out.push_back(std::move(p));
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + "malformed record: " + e.what());
    }
  }
  return out;
}

}  // namespace tlab
