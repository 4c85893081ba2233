#include "tlab/vocab.hpp"

#include <cstdio>

#include "tlab/error.hpp"
#include "tlab/rng.hpp"

namespace tlab {

namespace {

constexpr int kAspectCount = 8;
constexpr int kMinWritingFillers = 4;

bool has_prefix_number(std::string_view s, char prefix) {
  if (s.size() < 2 || s[0] != prefix) return false;
  for (char c : s.substr(1))
    if (c < '0' || c > '9') return false;
  return true;
}

}  // namespace

std::string_view family_name(TaskFamily f) {
  switch (f) {
    case TaskFamily::arithmetic: return "arithmetic";
    case TaskFamily::sort: return "sort";
    case TaskFamily::copy: return "copy";
    case TaskFamily::writing: return "writing";
  }
  return "unknown";
}

const std::vector<TopicGroup>& topic_groups() {
  // Weights follow the bucket mix of the reference open-ended prompt pool.
  static const std::vector<TopicGroup> groups = {
      {"policy/history", 34.8, {"policy", "history"}},
      {"biomedicine/health", 15.7, {"health", "biology"}},
      {"technology/engineering", 15.6, {"tech", "engineering"}},
      {"environment/earth", 14.7, {"earth", "climate"}},
      {"humanities/culture", 9.3, {"culture", "arts"}},
      {"general analysis", 9.8, {"analysis"}},
  };
  return groups;
}

Vocabulary Vocabulary::standard(int size) {
  if (size < 16) throw ConfigError("vocab_size must be at least 16, got " + std::to_string(size));
  if (size > 65535) throw ConfigError("vocab_size too large");
  std::vector<std::string> layout = {std::string(kEosSurface), std::string(kAnswerSurface),
                                     std::string(kSectionSurface)};
  for (int d = 0; d < 10; ++d) layout.push_back(std::to_string(d));
  for (const char* op : {"+", "-", "*", "=", "."}) layout.emplace_back(op);
  for (const char* cmd : {"sort", "copy", "write"}) layout.emplace_back(cmd);
  for (const auto& g : topic_groups())
    for (auto w : g.words) layout.emplace_back(w);
  for (int a = 0; a < kAspectCount; ++a) layout.push_back("a" + std::to_string(a));
  if (static_cast<int>(layout.size()) > size) {
    layout.resize(static_cast<std::size_t>(size));
  } else {
    for (int w = 0; static_cast<int>(layout.size()) < size; ++w)
      layout.push_back("w" + std::to_string(w));
  }
  Vocabulary v = from_surfaces(std::move(layout));
  v.layout_id_ = "std" + std::to_string(size);
  return v;
}

Vocabulary Vocabulary::from_surfaces(std::vector<std::string> surfaces) {
  if (surfaces.size() < 2 || surfaces[0] != kEosSurface || surfaces[1] != kAnswerSurface)
    throw ConfigError("vocabulary must start with <eos> and <ans>");
  if (surfaces.size() > 65535) throw ConfigError("vocabulary too large");
  Vocabulary v;
  v.surfaces_ = std::move(surfaces);
  v.aspect_slot_.assign(v.surfaces_.size(), -1);
  std::unordered_map<std::string_view, bool> topic_words;
  for (const auto& g : topic_groups())
    for (auto w : g.words) topic_words[w] = true;
  for (std::size_t i = 0; i < v.surfaces_.size(); ++i) {
    const auto id = static_cast<TokenId>(i);
    const std::string& s = v.surfaces_[i];
    if (!v.index_.emplace(s, id).second) throw ConfigError("duplicate token surface '" + s + "'");
    if (s == kSectionSurface) v.section_ = id;
    if (s.size() == 1 && s[0] >= '0' && s[0] <= '9') v.digits_[s[0] - '0'] = id;
    if (has_prefix_number(s, 'a')) {
      v.aspect_slot_[i] = static_cast<int>(v.aspects_.size());
      v.aspects_.push_back(id);
    }
    if (has_prefix_number(s, 'w')) v.fillers_.push_back(id);
    if (topic_words.contains(s)) v.topics_.push_back(id);
  }
  std::string joined;
  for (const auto& s : v.surfaces_) joined += s + '\x1f';
  char buf[32];
  std::snprintf(buf, sizeof buf, "custom-%016llx",
                static_cast<unsigned long long>(hash_string(joined)));
  v.layout_id_ = buf;
  return v;
}

std::optional<TokenId> Vocabulary::find(std::string_view surface) const {
  auto it = index_.find(std::string(surface));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<TokenId> Vocabulary::op(char c) const { return find(std::string_view(&c, 1)); }

std::optional<int> Vocabulary::digit_value(TokenId id) const {
  for (int d = 0; d < 10; ++d)
    if (digits_[d] && *digits_[d] == id) return d;
  return std::nullopt;
}

int Vocabulary::aspect_index(TokenId id) const {
  return id < aspect_slot_.size() ? aspect_slot_[id] : -1;
}

std::optional<std::string> Vocabulary::unsupported(TaskFamily family) const {
  const std::string name(family_name(family));
  for (int d = 0; d < 10; ++d)
    if (!digits_[d]) return name;
  switch (family) {
    case TaskFamily::arithmetic:
      for (char c : {'+', '-', '*', '='})
        if (!op(c)) return name;
      break;
    case TaskFamily::sort:
      if (!find("sort")) return name;
      break;
    case TaskFamily::copy:
      if (!find("copy")) return name;
      break;
    case TaskFamily::writing:
      if (!find("write") || !section_ || aspects_.size() < 4 || topics_.empty() ||
          fillers_.size() < kMinWritingFillers)
        return name;
      break;
  }
  return std::nullopt;
}

std::string Vocabulary::render(std::span<const TokenId> seq) const {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ' ';
    out += surface(seq[i]);
  }
  return out;
}

TokenSeq Vocabulary::encode(std::span<const std::string> surfaces) const {
  TokenSeq out;
  out.reserve(surfaces.size());
  for (const auto& s : surfaces) {
    auto id = find(s);
    if (!id) throw DataError("unknown token surface '" + s + "'");
    out.push_back(*id);
  }
  return out;
}

}  // namespace tlab
