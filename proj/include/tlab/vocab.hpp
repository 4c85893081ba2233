#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tlab {

using TokenId = std::uint16_t;
using TokenSeq = std::vector<TokenId>;

// Reserved ids shared by every vocabulary.
inline constexpr TokenId kEos = 0;
inline constexpr TokenId kAnswerMarker = 1;

inline constexpr std::string_view kEosSurface = "<eos>";
inline constexpr std::string_view kAnswerSurface = "<ans>";
inline constexpr std::string_view kSectionSurface = "<sec>";

// Task families a vocabulary may or may not be able to encode.
enum class TaskFamily { arithmetic, sort, copy, writing };

std::string_view family_name(TaskFamily f);

// Fixed token inventory. Token roles (digit, aspect, filler, topic) are
// inferred from surfaces so hand-built test vocabularies and the standard
// layout behave identically.
class Vocabulary {
 public:
  // Standard layout: reserved tokens, digits, operators, task commands,
  // topic words, aspect tags, then filler words up to `size`.
  static Vocabulary standard(int size);
  // Arbitrary inventory; the first two surfaces must be <eos> and <ans>.
  static Vocabulary from_surfaces(std::vector<std::string> surfaces);

  int size() const { return static_cast<int>(surfaces_.size()); }
  const std::string& surface(TokenId id) const { return surfaces_.at(id); }
  const std::vector<std::string>& surfaces() const { return surfaces_; }
  std::optional<TokenId> find(std::string_view surface) const;

  std::optional<TokenId> section() const { return section_; }
  std::optional<TokenId> op(char c) const;
  std::optional<TokenId> command(std::string_view name) const { return find(name); }
  std::optional<TokenId> digit(int d) const { return digits_[d]; }
  std::optional<int> digit_value(TokenId id) const;

  const std::vector<TokenId>& aspects() const { return aspects_; }
  const std::vector<TokenId>& fillers() const { return fillers_; }
  const std::vector<TokenId>& topics() const { return topics_; }
  bool is_aspect(TokenId id) const { return aspect_index(id) >= 0; }
  // Position of id in aspects(), or -1.
  int aspect_index(TokenId id) const;

  // Family name of the first requirement this vocabulary fails, if any.
  std::optional<std::string> unsupported(TaskFamily family) const;

  std::string render(std::span<const TokenId> seq) const;
  TokenSeq encode(std::span<const std::string> surfaces) const;  // throws DataError
  // Identifier bound into feature specs and checkpoints.
  const std::string& layout_id() const { return layout_id_; }

  bool operator==(const Vocabulary& other) const { return surfaces_ == other.surfaces_; }

 private:
  std::vector<std::string> surfaces_;
  std::unordered_map<std::string, TokenId> index_;
  std::optional<TokenId> section_;
  std::optional<TokenId> digits_[10];
  std::vector<TokenId> aspects_;
  std::vector<TokenId> fillers_;
  std::vector<TokenId> topics_;
  std::vector<int> aspect_slot_;
  std::string layout_id_;
};

// Topic words of the standard layout, grouped by audit bucket.
struct TopicGroup {
  std::string_view bucket;
  double weight;  // sampling weight in percent
  std::vector<std::string_view> words;
};
const std::vector<TopicGroup>& topic_groups();

}  // namespace tlab
