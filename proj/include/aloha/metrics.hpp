#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "aloha/error.hpp"
#include "aloha/model.hpp"
#include "aloha/text.hpp"

namespace aloha {

// One evaluated sample: caption-level hallucination confidence (for the
// soft metric, the negated caption score) plus per-object confidences.
struct MetricConfidence {
  std::string sample_id;
  double confidence = 0.0;
  std::vector<std::pair<std::string, double>> predicted_objects;
};

namespace detail {

inline std::unordered_map<std::string, const EvalSample*> index_gold(
    const std::vector<MetricConfidence>& preds, const std::vector<EvalSample>& gold) {
  if (preds.size() != gold.size())
    throw IdMismatch("prediction and gold counts differ");
  std::unordered_map<std::string, const EvalSample*> by_id;
  for (const auto& g : gold) {
    if (!by_id.emplace(g.sample_id, &g).second)
      throw IdMismatch("duplicate gold sample id: " + g.sample_id);
  }
  std::unordered_set<std::string> seen;
  for (const auto& p : preds) {
    if (!by_id.count(p.sample_id))
      throw IdMismatch("prediction without gold sample: " + p.sample_id);
    if (!seen.insert(p.sample_id).second)
      throw IdMismatch("duplicate prediction id: " + p.sample_id);
  }
  return by_id;
}

}  // namespace detail

/// Average precision with positive class = hallucinated. Predictions are
/// sorted by confidence descending (ties ordered by sample id) and precision/
/// recall are evaluated once per distinct confidence value; AP is the sum of
/// recall increments times precision. Invariant under any strictly monotone
/// transform of the confidences.
inline double average_precision(const std::vector<MetricConfidence>& preds,
                                const std::vector<EvalSample>& gold) {
  auto by_id = detail::index_gold(preds, gold);
  std::size_t positives = 0;
  for (const auto& g : gold) positives += g.gold_hallucinated ? 1u : 0u;
  if (positives == 0) throw NoPositives("gold labels contain no hallucinated sample");

  std::vector<const MetricConfidence*> order;
  order.reserve(preds.size());
  for (const auto& p : preds) order.push_back(&p);
  std::sort(order.begin(), order.end(),
            [](const MetricConfidence* a, const MetricConfidence* b) {
              if (a->confidence != b->confidence) return a->confidence > b->confidence;
              return a->sample_id < b->sample_id;
            });

  double ap = 0.0, prev_recall = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    ++seen;
    if (by_id.at(order[i]->sample_id)->gold_hallucinated) ++tp;
    const bool group_end =
        i + 1 == order.size() || order[i + 1]->confidence != order[i]->confidence;
    if (!group_end) continue;
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

enum class LocalizationRule {
  // Hit when the object with the minimum score (maximum per-object
  // confidence) matches a gold hallucinated object.
  min_score_object,
  // Hit when at least one flagged object matches a gold hallucinated object
  // (binary baselines).
  any_flagged_object,
};

namespace detail {

inline bool object_matches(const std::string& predicted, const std::string& gold) {
  const std::string p = normalize_phrase(predicted);
  const std::string g = normalize_phrase(gold);
  return p == g || head_noun(p) == head_noun(g);
}

}  // namespace detail

/// Among samples with object-level gold labels, the fraction where the
/// metric points at a truly hallucinated object.
inline double localization_accuracy(const std::vector<MetricConfidence>& preds,
                                    const std::vector<EvalSample>& gold,
                                    LocalizationRule rule = LocalizationRule::min_score_object,
                                    double flag_confidence_threshold = -0.5) {
  auto by_id = detail::index_gold(preds, gold);
  std::unordered_map<std::string, const MetricConfidence*> pred_by_id;
  for (const auto& p : preds) pred_by_id.emplace(p.sample_id, &p);

  std::size_t localizable = 0, hits = 0;
  for (const auto& g : gold) {
    if (g.gold_hallucinated_objects.empty()) continue;
    ++localizable;
    const auto& pred = *pred_by_id.at(g.sample_id);
    if (pred.predicted_objects.empty()) continue;

    auto is_hit = [&](const std::string& phrase) {
      for (const auto& gobj : g.gold_hallucinated_objects) {
        if (detail::object_matches(phrase, gobj)) return true;
      }
      return false;
    };

    if (rule == LocalizationRule::min_score_object) {
      std::size_t arg = 0;
      for (std::size_t i = 1; i < pred.predicted_objects.size(); ++i) {
        if (pred.predicted_objects[i].second > pred.predicted_objects[arg].second)
          arg = i;  // strict: first of equals wins
      }
      if (is_hit(pred.predicted_objects[arg].first)) ++hits;
    } else {
      for (const auto& [phrase, conf] : pred.predicted_objects) {
        if (conf >= flag_confidence_threshold && is_hit(phrase)) {
          ++hits;
          break;
        }
      }
    }
  }
  if (localizable == 0)
    throw NoLocalizableSamples("no gold sample carries object-level labels");
  return static_cast<double>(hits) / static_cast<double>(localizable);
}

struct ParsingRates {
  double per = 0.0;  // fraction of parsed objects absent from gold
  double prr = 1.0;  // fraction of gold objects present in parsed
};

/// Micro-averaged parsing error and recall rates, matched by normalized
/// phrase. With no parsed objects PER is 0; with no gold objects PRR is 1.
inline ParsingRates parsing_rates(const std::vector<std::vector<std::string>>& parsed,
                                  const std::vector<std::vector<std::string>>& gold_objects) {
  if (parsed.size() != gold_objects.size())
    throw Error("parsing_rates: sample counts differ");
  std::size_t total_parsed = 0, absent = 0, total_gold = 0, found = 0;
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    std::unordered_set<std::string> gold_set, parsed_set;
    for (const auto& g : gold_objects[i]) gold_set.insert(normalize_phrase(g));
    for (const auto& p : parsed[i]) parsed_set.insert(normalize_phrase(p));
    for (const auto& p : parsed_set) {
      ++total_parsed;
      if (!gold_set.count(p)) ++absent;
    }
    for (const auto& g : gold_set) {
      ++total_gold;
      if (parsed_set.count(g)) ++found;
    }
  }
  ParsingRates r;
  r.per = total_parsed == 0 ? 0.0
                            : static_cast<double>(absent) / static_cast<double>(total_parsed);
  r.prr = total_gold == 0 ? 1.0
                          : static_cast<double>(found) / static_cast<double>(total_gold);
  return r;
}

}  // namespace aloha
