#pragma once

#include <string>
#include <unordered_set>
#include <vector>

#include "aloha/backends.hpp"
#include "aloha/error.hpp"
#include "aloha/model.hpp"
#include "aloha/prompt.hpp"
#include "aloha/text.hpp"

namespace aloha {

namespace detail {

inline std::string to_lower_copy(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = to_lower(c);
  return out;
}

// Split on the standalone token " or " (any case). Nested conjunctions
// ("a or b or c") yield three or more alternatives.
inline std::vector<std::string> split_alternatives(const std::string& text) {
  std::vector<std::string> parts;
  const std::string lower = to_lower_copy(text);
  std::size_t start = 0;
  while (true) {
    const std::size_t at = lower.find(" or ", start);
    if (at == std::string::npos) break;
    parts.push_back(text.substr(start, at - start));
    start = at + 4;
  }
  parts.push_back(text.substr(start));
  return parts;
}

inline bool strip_possibly_suffix(std::string& item) {
  static const std::string marker = "(possibly)";
  const std::string lower = to_lower_copy(trim(item));
  if (lower.size() < marker.size()) return false;
  if (lower.compare(lower.size() - marker.size(), marker.size(), marker) != 0)
    return false;
  std::string t = trim(item);
  item = trim(t.substr(0, t.size() - marker.size()));
  return true;
}

inline std::vector<ObjectMention> dedup_by_phrase(std::vector<ObjectMention> mentions) {
  std::vector<ObjectMention> out;
  std::unordered_set<std::string> seen;
  for (auto& m : mentions) {
    if (!seen.insert(m.phrase).second) continue;
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace detail

/// Parse a completion into mentions: one per "- " bullet line. A trailing
/// "(possibly)" marks the mention uncertain; " or " splits a line into
/// alternatives. Header and chatter lines are skipped; if the completion is
/// non-empty but nothing parses, that is a MalformedCompletion.
inline std::vector<ObjectMention> parse_llm_object_list(const std::string& raw_completion) {
  std::vector<ObjectMention> mentions;
  std::size_t start = 0;
  while (start <= raw_completion.size()) {
    const std::size_t end = raw_completion.find('\n', start);
    const std::string line =
        raw_completion.substr(start, end == std::string::npos ? std::string::npos
                                                              : end - start);
    start = end == std::string::npos ? raw_completion.size() + 1 : end + 1;
    const std::string t = trim(line);
    if (t.size() < 3 || t.compare(0, 2, "- ") != 0) continue;
    std::string item = trim(t.substr(2));
    if (item.empty()) continue;
    const std::string raw_text = item;
    const bool uncertain = detail::strip_possibly_suffix(item);
    auto mention =
        make_mention(raw_text, detail::split_alternatives(item), uncertain);
    if (mention) mentions.push_back(std::move(*mention));
  }
  if (mentions.empty() && !trim(raw_completion).empty())
    throw MalformedCompletion("no object lines in completion");
  return mentions;
}

/// Prompt the chat backend at temperature zero and parse the completion.
/// The result is deduplicated by normalized phrase.
inline std::vector<ObjectMention> extract_llm(const ExtractorRequest& request,
                                              ChatBackend& chat,
                                              const PromptBundle& bundle) {
  const std::string prompt = build_prompt(request, bundle);
  const std::string completion = chat.complete(prompt, 0.0);
  if (trim(completion).empty())
    throw MalformedCompletion("backend returned an empty completion");
  return detail::dedup_by_phrase(parse_llm_object_list(completion));
}

namespace detail {

enum class TokenKind { boundary, adjective, noun };

inline const std::unordered_set<std::string>& function_words() {
  static const std::unordered_set<std::string> set = {
      "a", "an", "the", "this", "that", "these", "those", "there", "here",
      "my", "your", "his", "her", "its", "our", "their", "whose",
      "some", "any", "each", "every", "no", "not", "all", "both", "several",
      "many", "few", "much", "more", "most", "other", "another", "such", "same",
      "own", "as", "of", "in", "on", "at", "by", "with", "without", "from",
      "to", "into", "onto", "for", "over", "under", "above", "below", "near",
      "beside", "behind", "between", "through", "across", "around", "along",
      "up", "down", "off", "out", "against", "during", "about", "and", "or",
      "but", "nor", "so", "yet", "while", "when", "where", "which", "who",
      "whom", "what", "it", "he", "she", "they", "we", "you", "i", "them",
      "him", "us", "me", "is", "are", "was", "were", "be", "been", "being",
      "am", "do", "does", "did", "doing", "have", "has", "had", "having",
      "will", "would", "can", "could", "shall", "should", "may", "might",
      "must", "one", "two", "three", "four", "five", "six", "seven", "eight",
      "nine", "ten", "next",
  };
  return set;
}

inline const std::unordered_set<std::string>& common_verbs() {
  static const std::unordered_set<std::string> set = {
      "sit", "sits", "stand", "stands", "ride", "rides", "hold", "holds",
      "wear", "wears", "eat", "eats", "play", "plays", "walk", "walks",
      "run", "runs", "jump", "jumps", "fly", "flies", "look", "looks",
      "watch", "watches", "carry", "carries", "drive", "drives", "stop",
      "stops", "go", "goes", "come", "comes", "make", "makes", "take",
      "takes", "put", "puts", "give", "gives", "get", "gets", "see", "sees",
      "say", "says", "lean", "leans", "lie", "lies", "lay", "lays", "rest",
      "rests", "graze", "grazes", "bite", "bites",
  };
  return set;
}

inline const std::unordered_set<std::string>& known_adjectives() {
  static const std::unordered_set<std::string> set = {
      "big", "small", "large", "little", "tall", "short", "tiny", "huge",
      "long", "wide", "narrow", "old", "young", "new", "red", "blue",
      "green", "yellow", "purple", "pink", "black", "white", "brown",
      "gray", "grey", "dark", "bright", "colorful", "wooden", "metal",
      "plastic", "stone", "brick", "grassy", "sunny", "cloudy", "rainy",
      "snowy", "furry", "fluffy", "shiny", "rusty", "dusty", "sandy",
      "rocky", "leafy", "messy", "dirty", "clean", "open", "closed",
      "empty", "full", "electric", "acoustic", "beautiful", "pretty",
      "cute", "busy", "crowded", "quiet", "loud", "modern", "vintage",
      "striped", "spotted", "round", "square", "flat", "sharp", "soft",
      "warm", "cold", "hot", "cool", "fresh", "wet", "dry", "outdoor",
      "indoor", "giant",
  };
  return set;
}

// Nouns that the -ing/-ed suffix heuristic would otherwise throw away.
inline const std::unordered_set<std::string>& noun_exceptions() {
  static const std::unordered_set<std::string> set = {
      "building", "buildings", "painting", "paintings", "ceiling", "ceilings",
      "clothing", "railing", "railings", "awning", "awnings", "wedding",
      "weddings", "pudding", "drawing", "drawings", "swing", "swings",
      "string", "strings", "spring", "springs", "ring", "rings", "wing",
      "wings", "king", "kings", "evening", "morning", "lightning",
      "frosting", "icing", "bed", "beds", "shed", "sheds", "sled", "sleds",
      "seed", "seeds", "weed", "weeds", "reed", "reeds", "speed",
  };
  return set;
}

inline bool ends_with_any(std::string_view word, std::initializer_list<const char*> sufs) {
  for (const char* s : sufs) {
    if (ends_with(word, s)) return true;
  }
  return false;
}

inline TokenKind classify_token(const std::string& token) {
  if (function_words().count(token)) return TokenKind::boundary;
  if (common_verbs().count(token)) return TokenKind::boundary;
  if (known_adjectives().count(token)) return TokenKind::adjective;
  if (noun_exceptions().count(token)) return TokenKind::noun;
  // Hyphenated modifiers like "tulip-shaped" act as adjectives.
  if (token.find('-') != std::string::npos && ends_with_any(token, {"ed", "ing"}))
    return TokenKind::adjective;
  if (ends_with_any(token, {"ly", "ing", "ed"})) return TokenKind::boundary;
  return TokenKind::noun;
}

}  // namespace detail

/// Deterministic grammar-based fallback extractor: shipped lexicon plus
/// suffix heuristics, chunking contiguous (adjective)* (noun)+ runs. No I/O,
/// no network. Known to share CHAIR-style ambiguities (it will happily read
/// "orange" as a noun); the LLM extractor is the primary path.
inline std::vector<ObjectMention> extract_grammar(const ExtractorRequest& request) {
  validate(request);
  std::vector<ObjectMention> mentions;
  for (const auto& caption : request.captions) {
    std::vector<std::string> chunk;
    bool has_noun = false;
    auto flush = [&] {
      if (has_noun && !chunk.empty()) {
        std::string phrase;
        for (const auto& t : chunk) {
          if (!phrase.empty()) phrase += ' ';
          phrase += t;
        }
        if (auto m = make_mention(phrase, {phrase}, false))
          mentions.push_back(std::move(*m));
      }
      chunk.clear();
      has_noun = false;
    };
    for (const auto& raw : split_whitespace(caption)) {
      const std::string token = normalize_phrase(raw);
      if (token.empty()) {
        flush();
        continue;
      }
      switch (detail::classify_token(token)) {
        case detail::TokenKind::boundary:
          flush();
          break;
        case detail::TokenKind::adjective:
          if (has_noun) flush();
          chunk.push_back(token);
          break;
        case detail::TokenKind::noun:
          chunk.push_back(singularize(token));
          has_noun = true;
          break;
      }
    }
    flush();
  }
  return detail::dedup_by_phrase(std::move(mentions));
}

/// Detector class labels become plain certain mentions, deduplicated by
/// normalized phrase.
inline std::vector<ObjectMention> ingest_detections(const std::vector<std::string>& labels) {
  std::vector<ObjectMention> mentions;
  for (const auto& label : labels) {
    if (auto m = make_mention(label, {label}, false)) mentions.push_back(std::move(*m));
  }
  return detail::dedup_by_phrase(std::move(mentions));
}

// Extraction strategy used by the pipeline; implementations must be safe for
// concurrent calls.
class ObjectExtractor {
 public:
  virtual ~ObjectExtractor() = default;
  virtual std::vector<ObjectMention> extract(const ExtractorRequest& request) = 0;
  virtual std::string id() const = 0;
};

class LlmExtractor : public ObjectExtractor {
 public:
  LlmExtractor(ChatBackend& chat, PromptBundle bundle)
      : chat_(chat), bundle_(std::move(bundle)) {}

  std::vector<ObjectMention> extract(const ExtractorRequest& request) override {
    return extract_llm(request, chat_, bundle_);
  }
  std::string id() const override { return "llm:" + chat_.id(); }

 private:
  ChatBackend& chat_;
  PromptBundle bundle_;
};

class GrammarExtractor : public ObjectExtractor {
 public:
  std::vector<ObjectMention> extract(const ExtractorRequest& request) override {
    return extract_grammar(request);
  }
  std::string id() const override { return "grammar"; }
};

}  // namespace aloha
