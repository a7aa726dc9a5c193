#pragma once

#include <functional>
#include <string>
#include <unordered_set>
#include <vector>

#include "aloha/model.hpp"
#include "aloha/text.hpp"

namespace aloha {

using HeadFinder = std::function<std::string(std::string_view)>;

/// Reference-side augmentation: for every multi-token phrase, append a
/// certain mention holding only its head noun, so a general candidate is not
/// penalized against an attribute-bearing reference. Candidates are never
/// augmented. Output phrases are a superset of the input phrases.
inline std::vector<ObjectMention> augment_root_nouns(
    const std::vector<ObjectMention>& mentions, const HeadFinder& head = head_noun) {
  std::vector<ObjectMention> out = mentions;
  std::unordered_set<std::string> seen;
  for (const auto& m : mentions)
    for (const auto& alt : m.alternatives) seen.insert(alt);
  for (const auto& m : mentions) {
    if (split_whitespace(m.phrase).size() < 2) continue;
    const std::string root = normalize_phrase(head(m.phrase));
    if (root.empty() || !seen.insert(root).second) continue;
    if (auto added = make_mention(root, {root}, false)) out.push_back(std::move(*added));
  }
  return out;
}

namespace detail {

inline std::vector<std::string> dedup_ordered(const std::vector<std::string>& objects) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& o : objects) {
    if (o.empty() || !seen.insert(o).second) continue;
    out.push_back(o);
  }
  return out;
}

}  // namespace detail

/// Expand conjunctions into concrete object-set variants: the Cartesian
/// product of per-mention alternatives, one pick per mention. Uncertain
/// mentions are dropped entirely on the candidate side and kept as plain
/// members on the reference side. If the product exceeds `cap`, degrade to
/// the base resolution plus one-conjunction-at-a-time deviations, `cap`
/// variants in total.
inline std::vector<ObjectSetVariant> expand_variants(
    const std::vector<ObjectMention>& mentions, Origin side, std::size_t cap = 128) {
  if (cap < 1) cap = 1;
  std::vector<const ObjectMention*> kept;
  for (const auto& m : mentions) {
    if (side == Origin::candidate && m.uncertain) continue;
    kept.push_back(&m);
  }

  std::vector<ObjectSetVariant> variants;
  auto emit = [&](const std::vector<std::size_t>& picks) {
    std::vector<std::string> objects;
    objects.reserve(kept.size());
    for (std::size_t k = 0; k < kept.size(); ++k)
      objects.push_back(kept[k]->alternatives[picks[k]]);
    variants.push_back(ObjectSetVariant{detail::dedup_ordered(objects), side,
                                        variants.size()});
  };

  if (kept.empty()) {
    variants.push_back(ObjectSetVariant{{}, side, 0});
    return variants;
  }

  std::size_t product = 1;
  bool overflow = false;
  for (const auto* m : kept) {
    product *= m->alternatives.size();
    if (product > cap) {
      overflow = true;
      break;
    }
  }

  std::vector<std::size_t> picks(kept.size(), 0);
  if (!overflow) {
    // Odometer over alternatives; the last mention varies fastest.
    while (true) {
      emit(picks);
      std::size_t k = kept.size();
      while (k > 0) {
        --k;
        if (++picks[k] < kept[k]->alternatives.size()) break;
        picks[k] = 0;
        if (k == 0) return variants;
      }
    }
  }

  // Documented degradation: all conjunctions at alternative 0, then vary one
  // conjunction at a time until the cap is reached.
  emit(picks);
  for (std::size_t k = 0; k < kept.size() && variants.size() < cap; ++k) {
    for (std::size_t a = 1;
         a < kept[k]->alternatives.size() && variants.size() < cap; ++a) {
      picks[k] = a;
      emit(picks);
    }
    picks[k] = 0;
  }
  return variants;
}

/// Union the detector-derived phrases into every reference variant.
inline std::vector<ObjectSetVariant> merge_detections(
    std::vector<ObjectSetVariant> variants, const std::vector<ObjectMention>& detections) {
  if (detections.empty()) return variants;
  for (auto& v : variants) {
    std::unordered_set<std::string> seen(v.objects.begin(), v.objects.end());
    for (const auto& d : detections) {
      if (seen.insert(d.phrase).second) v.objects.push_back(d.phrase);
    }
  }
  return variants;
}

}  // namespace aloha
