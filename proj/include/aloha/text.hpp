#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace aloha {

inline bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

inline bool is_alnum(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

inline char to_lower(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

/// Lowercase, collapse internal whitespace runs to one space, strip
/// leading/trailing whitespace and punctuation. Idempotent. Does not touch
/// inner punctuation ("tulip-shaped vase" is a fixed point). Does not
/// singularize; that belongs to the extractor contract.
inline std::string normalize_phrase(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char raw : text) {
    char c = to_lower(raw);
    if (is_space(c)) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(c);
  }
  // Trim outer punctuation: anything that is neither alphanumeric nor space.
  std::size_t begin = 0, end = out.size();
  while (begin < end && !is_alnum(out[begin])) ++begin;
  while (end > begin && !is_alnum(out[end - 1])) --end;
  std::string trimmed = out.substr(begin, end - begin);
  // The punctuation trim may expose fresh outer whitespace ("- dog -").
  std::size_t b2 = trimmed.find_first_not_of(' ');
  if (b2 == std::string::npos) return "";
  std::size_t e2 = trimmed.find_last_not_of(' ');
  return trimmed.substr(b2, e2 - b2 + 1);
}

/// Split on whitespace. No normalization.
inline std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

/// Head noun of a phrase under the default last-token head finder.
/// Hyphenated compounds count as one token ("toaster-oven" stays whole).
inline std::string head_noun(std::string_view phrase) {
  auto tokens = split_whitespace(phrase);
  if (tokens.empty()) return "";
  return tokens.back();
}

namespace detail {

inline const std::unordered_map<std::string, std::string>& irregular_plurals() {
  static const std::unordered_map<std::string, std::string> map = {
      {"people", "person"}, {"men", "man"},       {"women", "woman"},
      {"children", "child"}, {"feet", "foot"},    {"teeth", "tooth"},
      {"geese", "goose"},   {"mice", "mouse"},    {"wolves", "wolf"},
      {"knives", "knife"},  {"leaves", "leaf"},   {"shelves", "shelf"},
      {"loaves", "loaf"},   {"scarves", "scarf"}, {"buses", "bus"},
      {"oxen", "ox"},       {"cacti", "cactus"},
  };
  return map;
}

inline const std::unordered_set<std::string>& invariant_nouns() {
  static const std::unordered_set<std::string> set = {
      "sheep", "fish", "deer", "series", "species", "aircraft",
      "scissors", "pants", "shorts", "jeans", "glasses", "grass",
  };
  return set;
}

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace detail

/// Rule-based singular form: irregular table, -ies -> -y, -xes/-ches/-shes/
/// -sses/-zes/-oes -> strip "es", plain -s -> strip "s". Best effort only;
/// the LLM extractor is instructed to singularize upstream and this is the
/// fallback the grammar extractor uses.
inline std::string singularize(const std::string& word) {
  using detail::ends_with;
  if (word.size() < 3) return word;
  const auto& irregular = detail::irregular_plurals();
  if (auto it = irregular.find(word); it != irregular.end()) return it->second;
  if (detail::invariant_nouns().count(word)) return word;
  if (ends_with(word, "ies") && word.size() > 4)
    return word.substr(0, word.size() - 3) + "y";
  if (ends_with(word, "xes") || ends_with(word, "ches") ||
      ends_with(word, "shes") || ends_with(word, "sses") ||
      ends_with(word, "zes") || ends_with(word, "oes"))
    return word.substr(0, word.size() - 2);
  if (ends_with(word, "ss") || ends_with(word, "us") || ends_with(word, "is"))
    return word;
  if (ends_with(word, "s")) return word.substr(0, word.size() - 1);
  return word;
}

}  // namespace aloha
