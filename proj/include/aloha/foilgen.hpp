#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "aloha/backends.hpp"
#include "aloha/error.hpp"
#include "aloha/matching.hpp"
#include "aloha/model.hpp"
#include "aloha/text.hpp"

namespace aloha {

// Class list for foil substitution. The synonym map stands in for lexical
// neighbor lookups and is shipped as data: surface form -> canonical class.
struct ClassVocabulary {
  std::vector<std::string> classes;
  std::unordered_map<std::string, std::vector<std::string>> synonym_map;

  /// One class per line, optional tab-separated synonyms.
  static ClassVocabulary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open vocabulary: " + path);
    ClassVocabulary v;
    std::unordered_set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      std::vector<std::string> fields;
      std::size_t start = 0;
      while (start <= line.size()) {
        const std::size_t tab = line.find('\t', start);
        fields.push_back(line.substr(
            start, tab == std::string::npos ? std::string::npos : tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
      }
      const std::string cls = normalize_phrase(fields.front());
      if (cls.empty() || !seen.insert(cls).second) continue;
      v.classes.push_back(cls);
      for (std::size_t i = 1; i < fields.size(); ++i) {
        const std::string syn = normalize_phrase(fields[i]);
        if (!syn.empty()) v.synonym_map[cls].push_back(syn);
      }
    }
    if (v.classes.empty()) throw ParseError(path + ": no classes");
    return v;
  }
};

// A caption span whose surface form matches a vocabulary class or synonym.
struct ReplaceableSpan {
  std::size_t begin = 0;   // byte offset into the caption
  std::size_t length = 0;  // byte length of the span
  std::string cls;         // canonical class the span maps to
};

namespace detail {

struct CaptionToken {
  std::size_t begin = 0;
  std::size_t length = 0;
  std::string norm;
};

// Whitespace tokens trimmed of outer punctuation, with byte spans of the
// trimmed core so substitution leaves punctuation intact.
inline std::vector<CaptionToken> span_tokens(const std::string& caption) {
  std::vector<CaptionToken> tokens;
  std::size_t i = 0;
  while (i < caption.size()) {
    while (i < caption.size() && is_space(caption[i])) ++i;
    std::size_t start = i;
    while (i < caption.size() && !is_space(caption[i])) ++i;
    if (i == start) continue;
    std::size_t b = start, e = i;
    while (b < e && !is_alnum(caption[b])) ++b;
    while (e > b && !is_alnum(caption[e - 1])) --e;
    if (b == e) continue;
    CaptionToken t;
    t.begin = b;
    t.length = e - b;
    t.norm = normalize_phrase(caption.substr(b, e - b));
    tokens.push_back(std::move(t));
  }
  return tokens;
}

}  // namespace detail

/// Find caption spans whose normalized form matches a vocabulary class or a
/// listed synonym. Multi-word classes match as n-grams; the longest match at
/// each position wins and matches do not overlap.
inline std::vector<ReplaceableSpan> find_replaceable(const std::string& caption,
                                                     const ClassVocabulary& vocab) {
  std::unordered_map<std::string, std::string> surface_to_class;
  std::size_t max_words = 1;
  for (const auto& cls : vocab.classes) {
    surface_to_class.emplace(cls, cls);
    max_words = std::max(max_words, split_whitespace(cls).size());
  }
  for (const auto& [cls, syns] : vocab.synonym_map) {
    for (const auto& s : syns) {
      surface_to_class.emplace(s, cls);
      max_words = std::max(max_words, split_whitespace(s).size());
    }
  }

  const auto tokens = detail::span_tokens(caption);
  std::vector<ReplaceableSpan> spans;
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::size_t matched_len = 0;
    std::string matched_class;
    std::string ngram;
    for (std::size_t n = 0; n < max_words && i + n < tokens.size(); ++n) {
      if (n > 0) ngram += ' ';
      ngram += tokens[i + n].norm;
      auto it = surface_to_class.find(ngram);
      if (it != surface_to_class.end()) {
        matched_len = n + 1;
        matched_class = it->second;
      }
    }
    if (matched_len == 0) {
      ++i;
      continue;
    }
    const auto& first = tokens[i];
    const auto& last = tokens[i + matched_len - 1];
    spans.push_back({first.begin, last.begin + last.length - first.begin,
                     matched_class});
    i += matched_len;
  }
  return spans;
}

/// Rank every other class by similarity to `original` (descending, ties by
/// class string) and return the one at `rank` (1-indexed; 1 = most similar).
inline std::string pick_foil_class(const std::string& original,
                                   const ClassVocabulary& vocab,
                                   EmbeddingBackend& embedder, std::size_t rank = 10,
                                   EmbeddingCache* cache = nullptr) {
  if (rank < 1) throw Error("pick_foil_class: rank must be >= 1");
  const std::string norm = normalize_phrase(original);
  std::vector<std::string> others;
  for (const auto& cls : vocab.classes) {
    if (cls != norm) others.push_back(cls);
  }
  if (others.size() < rank)
    throw VocabularyTooSmall("need more than " + std::to_string(rank) +
                             " classes, have " + std::to_string(others.size() + 1));

  EmbeddingCache local;
  EmbeddingCache& c = cache ? *cache : local;
  std::vector<std::string> all = others;
  all.push_back(norm);
  c.ensure(embedder, all);

  const EmbeddingVector origin_vec = c.get_or_embed(embedder, norm);
  std::vector<std::pair<double, std::string>> ranked;
  ranked.reserve(others.size());
  for (const auto& cls : others)
    ranked.emplace_back(similarity(origin_vec, c.get_or_embed(embedder, cls)), cls);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  return ranked[rank - 1].second;
}

struct FoilPair {
  std::string true_caption;
  std::string foil_caption;
  std::string replaced_class;
  std::string foil_class;
  std::size_t reference_index = 0;  // which reference became the baseline
};

enum class FoilStatus { built, no_span, filtered, too_few_refs };

struct FoilOutcome {
  FoilStatus status = FoilStatus::no_span;
  std::optional<FoilPair> pair;
};

using GrammarPredicate = std::function<bool(const std::string&)>;

/// Accept-all grammaticality stand-in with a determiner-agreement check:
/// rejects "a <vowel-initial word>" and "an <consonant-initial word>".
inline bool default_grammar_predicate(const std::string& caption) {
  const auto tokens = split_whitespace(caption);
  auto starts_with_vowel = [](const std::string& w) {
    for (char c : w) {
      if (!is_alnum(c)) continue;
      const char l = to_lower(c);
      return l == 'a' || l == 'e' || l == 'i' || l == 'o' || l == 'u';
    }
    return false;
  };
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    const std::string det = normalize_phrase(tokens[i]);
    if (det == "a" && starts_with_vowel(tokens[i + 1])) return false;
    if (det == "an" && !starts_with_vowel(tokens[i + 1])) return false;
  }
  return true;
}

namespace detail {

inline bool first_alpha_is_upper(std::string_view s) {
  for (char c : s) {
    if (std::isalpha(static_cast<unsigned char>(c)))
      return std::isupper(static_cast<unsigned char>(c)) != 0;
  }
  return false;
}

inline std::string match_case(const std::string& foil, bool capitalize) {
  std::string out = foil;
  if (capitalize && !out.empty())
    out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

// Repair the determiner immediately before the replaced span so the shipped
// grammar predicate accepts the substitution ("an orange" -> "a truck").
inline std::string repair_preceding_determiner(std::string caption,
                                               std::size_t span_begin,
                                               const std::string& replacement) {
  auto vowel_initial = [](const std::string& w) {
    if (w.empty()) return false;
    const char l = to_lower(w[0]);
    return l == 'a' || l == 'e' || l == 'i' || l == 'o' || l == 'u';
  };
  // Walk back over whitespace, then over the preceding word.
  std::size_t e = span_begin;
  while (e > 0 && is_space(caption[e - 1])) --e;
  std::size_t b = e;
  while (b > 0 && !is_space(caption[b - 1])) --b;
  if (b == e) return caption;
  const std::string word = caption.substr(b, e - b);
  const std::string lower = normalize_phrase(word);
  const bool vowel = vowel_initial(replacement);
  std::string fixed;
  if (lower == "a" && vowel)
    fixed = word[0] == 'A' ? "An" : "an";
  else if (lower == "an" && !vowel)
    fixed = word[0] == 'A' ? "A" : "a";
  else
    return caption;
  return caption.substr(0, b) + fixed + caption.substr(e);
}

}  // namespace detail

/// Build one true/foil caption pair from a sample: pick a baseline reference
/// and a replaceable span with the seeded RNG, substitute the rank-selected
/// foil class with case matching, then filter through the grammaticality
/// predicate. Pure function of (sample, vocab, embedder, seed, rank).
inline FoilOutcome build_foil_pair(const EvalSample& sample,
                                   const ClassVocabulary& vocab,
                                   EmbeddingBackend& embedder,
                                   const GrammarPredicate& grammar_ok,
                                   std::uint64_t rng_seed, std::size_t rank = 10,
                                   EmbeddingCache* cache = nullptr) {
  FoilOutcome outcome;
  if (sample.references.size() < 2) {
    outcome.status = FoilStatus::too_few_refs;
    return outcome;
  }
  std::mt19937_64 rng(rng_seed);
  // rng() % n is deterministic across platforms, unlike the distributions.
  const std::size_t ref_index = rng() % sample.references.size();
  const std::string& baseline = sample.references[ref_index];

  const auto spans = find_replaceable(baseline, vocab);
  if (spans.empty()) {
    outcome.status = FoilStatus::no_span;
    return outcome;
  }
  const ReplaceableSpan& span = spans[rng() % spans.size()];
  const std::string foil_class =
      pick_foil_class(span.cls, vocab, embedder, rank, cache);

  const std::string original_text = baseline.substr(span.begin, span.length);
  const std::string replacement = detail::match_case(
      foil_class, detail::first_alpha_is_upper(original_text));
  std::string foil = baseline.substr(0, span.begin) + replacement +
                     baseline.substr(span.begin + span.length);
  foil = detail::repair_preceding_determiner(foil, span.begin, replacement);

  if (!grammar_ok(foil)) {
    outcome.status = FoilStatus::filtered;
    return outcome;
  }
  outcome.status = FoilStatus::built;
  outcome.pair = FoilPair{baseline, foil, span.cls, foil_class, ref_index};
  return outcome;
}

/// Expand a built pair into the emitted "#true" / "#foil" samples: the
/// baseline reference becomes the candidate and leaves the reference set.
inline std::pair<EvalSample, EvalSample> make_foil_samples(const EvalSample& source,
                                                           const FoilPair& pair) {
  std::vector<std::string> remaining;
  for (std::size_t i = 0; i < source.references.size(); ++i) {
    if (i != pair.reference_index) remaining.push_back(source.references[i]);
  }
  EvalSample truth;
  truth.sample_id = source.sample_id + "#true";
  truth.candidate = pair.true_caption;
  truth.references = remaining;
  truth.detections = source.detections;
  truth.gold_hallucinated = false;

  EvalSample foil;
  foil.sample_id = source.sample_id + "#foil";
  foil.candidate = pair.foil_caption;
  foil.references = remaining;
  foil.detections = source.detections;
  foil.gold_hallucinated = true;
  foil.gold_hallucinated_objects = {pair.foil_class};
  return {std::move(truth), std::move(foil)};
}

}  // namespace aloha
