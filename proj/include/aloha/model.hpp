#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "aloha/error.hpp"
#include "aloha/text.hpp"

namespace aloha {

using EmbeddingVector = std::vector<double>;

// One object extracted from a caption. `alternatives` holds every reading of
// a conjunction line ("fork or knife" -> {"fork", "knife"}); it has exactly
// one entry when there is no conjunction, and phrase == alternatives[0].
struct ObjectMention {
  std::string raw_text;
  std::string phrase;
  bool uncertain = false;
  std::vector<std::string> alternatives;
};

/// Build a mention and enforce its invariants. Alternatives are normalized;
/// empty ones are dropped. Returns nullopt when nothing survives.
inline std::optional<ObjectMention> make_mention(std::string raw_text,
                                                 std::vector<std::string> alternatives,
                                                 bool uncertain) {
  std::vector<std::string> alts;
  for (auto& a : alternatives) {
    std::string n = normalize_phrase(a);
    if (n.empty() || n == "or") continue;
    alts.push_back(std::move(n));
  }
  if (alts.empty()) return std::nullopt;
  ObjectMention m;
  m.raw_text = std::move(raw_text);
  m.phrase = alts.front();
  m.uncertain = uncertain;
  m.alternatives = std::move(alts);
  return m;
}

enum class Origin { candidate, reference };

// One concrete resolution of all conjunctions on one side: the C_i or R_j the
// matcher works with. Objects are deduplicated and keep first-seen order.
struct ObjectSetVariant {
  std::vector<std::string> objects;
  Origin origin = Origin::candidate;
  std::size_t variant_index = 0;
};

struct SimilarityMatrix {
  // weights[row][col]; rows are candidate objects, columns reference objects.
  std::vector<std::vector<double>> weights;
  std::vector<std::string> candidate_objects;
  std::vector<std::string> reference_objects;

  std::size_t rows() const { return candidate_objects.size(); }
  std::size_t cols() const { return reference_objects.size(); }
};

struct AssignmentPair {
  std::size_t row = 0;
  std::size_t col = 0;
  double weight = 0.0;
};

// Injective partial mapping from rows to columns with maximal total weight.
struct Assignment {
  std::vector<AssignmentPair> pairs;
  std::vector<std::size_t> unmatched_rows;

  double total_weight() const {
    double t = 0.0;
    for (const auto& p : pairs) t += p.weight;
    return t;
  }
};

struct ObjectScore {
  std::string phrase;                      // candidate phrase (alternatives[0])
  double score = 0.0;                      // per-object hallucination score
  std::optional<std::string> matched_reference;
  std::size_t variant_candidate = 0;       // i achieving the max
  std::size_t variant_reference = 0;       // j achieving the max
};

// Per-object scores plus the caption-level minimum.
struct ScoreReport {
  std::vector<ObjectScore> object_scores;
  double caption_score = 1.0;              // 1.0 when no certain objects remain
  std::vector<std::string> excluded_uncertain;
};

struct EvalSample {
  std::string sample_id;
  std::string candidate;
  std::vector<std::string> references;
  std::vector<std::string> detections;
  bool gold_hallucinated = false;
  std::vector<std::string> gold_hallucinated_objects;
};

/// Scores serialize with 4 decimal places; computation stays full precision.
inline double round_score(double v) {
  return std::round(v * 10000.0) / 10000.0;
}

inline std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

inline nlohmann::json to_json(const EvalSample& s) {
  return nlohmann::json{{"sample_id", s.sample_id},
                        {"candidate", s.candidate},
                        {"references", s.references},
                        {"detections", s.detections},
                        {"gold_hallucinated", s.gold_hallucinated},
                        {"gold_hallucinated_objects", s.gold_hallucinated_objects}};
}

inline EvalSample sample_from_json(const nlohmann::json& j) {
  EvalSample s;
  try {
    s.sample_id = j.at("sample_id").get<std::string>();
    s.candidate = j.at("candidate").get<std::string>();
    s.references = j.at("references").get<std::vector<std::string>>();
    if (j.contains("detections"))
      s.detections = j.at("detections").get<std::vector<std::string>>();
    if (j.contains("gold_hallucinated"))
      s.gold_hallucinated = j.at("gold_hallucinated").get<bool>();
    if (j.contains("gold_hallucinated_objects"))
      s.gold_hallucinated_objects =
          j.at("gold_hallucinated_objects").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad sample record: ") + e.what());
  }
  if (!s.gold_hallucinated_objects.empty() && !s.gold_hallucinated)
    throw ParseError("sample " + s.sample_id +
                     ": gold_hallucinated_objects without gold_hallucinated");
  return s;
}

/// Read a JSON-Lines dataset. Blank lines are skipped.
inline std::vector<EvalSample> read_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset: " + path);
  std::vector<EvalSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ParseError(path + ":" + std::to_string(lineno) + ": invalid JSON");
    out.push_back(sample_from_json(j));
  }
  return out;
}

inline void write_samples(const std::string& path,
                          const std::vector<EvalSample>& samples) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ParseError("cannot write dataset: " + path);
  for (const auto& s : samples) out << to_json(s).dump() << "\n";
}

inline nlohmann::json to_json(const ScoreReport& r, double threshold) {
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : r.object_scores) {
    nlohmann::json row{{"phrase", o.phrase},
                       {"score", round_score(o.score)},
                       {"variant_candidate", o.variant_candidate},
                       {"variant_reference", o.variant_reference},
                       {"hallucination", o.score <= threshold}};
    if (o.matched_reference)
      row["matched_reference"] = *o.matched_reference;
    else
      row["matched_reference"] = nullptr;
    objects.push_back(std::move(row));
  }
  return nlohmann::json{{"caption_score", round_score(r.caption_score)},
                        {"objects", std::move(objects)},
                        {"excluded_uncertain", r.excluded_uncertain},
                        {"threshold", threshold}};
}

}  // namespace aloha
