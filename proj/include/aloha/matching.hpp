#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "aloha/assignment.hpp"
#include "aloha/backends.hpp"
#include "aloha/error.hpp"
#include "aloha/model.hpp"

namespace aloha {

/// Cosine similarity clamped to [0, 1]. The embedding models this pipeline
/// targets only produce non-negative similarities; clamping keeps the
/// documented range when one does not.
inline double similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.size() != b.size())
    throw DimensionMismatch("cosine over dimensions " + std::to_string(a.size()) +
                            " and " + std::to_string(b.size()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 1e-24 || nb <= 1e-24) throw ZeroVector("cosine over a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

/// Per-phrase embedding cache keyed by (embedder id, phrase). The same
/// phrase recurs across variant pairs; embed it once. Safe for concurrent
/// use.
class EmbeddingCache {
 public:
  const EmbeddingVector& get_or_embed(EmbeddingBackend& backend,
                                      const std::string& phrase) {
    ensure(backend, {phrase});
    std::shared_lock lock(mu_);
    return vectors_.at(make_key(backend, phrase));
  }

  /// Embed every missing phrase in one batched call.
  void ensure(EmbeddingBackend& backend, const std::vector<std::string>& phrases) {
    std::vector<std::string> missing;
    {
      std::shared_lock lock(mu_);
      for (const auto& p : phrases) {
        if (!vectors_.count(make_key(backend, p))) missing.push_back(p);
      }
    }
    if (missing.empty()) return;
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    auto embedded = backend.embed_many(missing);
    std::unique_lock lock(mu_);
    for (std::size_t i = 0; i < missing.size(); ++i)
      vectors_.emplace(make_key(backend, missing[i]), std::move(embedded[i]));
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return vectors_.size();
  }

 private:
  static std::string make_key(const EmbeddingBackend& backend, const std::string& p) {
    return backend.id() + '\x1f' + p;
  }

  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, EmbeddingVector> vectors_;
};

/// Pairwise similarity of one candidate variant against one reference
/// variant. Rows are candidate objects, columns reference objects.
inline SimilarityMatrix build_similarity_matrix(const ObjectSetVariant& c_variant,
                                                const ObjectSetVariant& r_variant,
                                                EmbeddingBackend& embedder,
                                                EmbeddingCache* cache = nullptr) {
  SimilarityMatrix m;
  m.candidate_objects = c_variant.objects;
  m.reference_objects = r_variant.objects;

  EmbeddingCache local;
  EmbeddingCache& c = cache ? *cache : local;
  std::vector<std::string> all = c_variant.objects;
  all.insert(all.end(), r_variant.objects.begin(), r_variant.objects.end());
  c.ensure(embedder, all);

  m.weights.assign(m.rows(), std::vector<double>(m.cols(), 0.0));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto& cv = c.get_or_embed(embedder, m.candidate_objects[r]);
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const auto& rv = c.get_or_embed(embedder, m.reference_objects[j]);
      m.weights[r][j] = similarity(cv, rv);
    }
  }
  return m;
}

/// Score every certain candidate mention against every (C_i, R_j) variant
/// pair: the per-object score is the matched assignment weight, maximized
/// over variant pairs and over the mention's conjunction alternatives, with
/// unmatched objects contributing 0. The caption score is the minimum
/// per-object score, or 1.0 when no certain candidate object remains.
inline ScoreReport score_objects(const std::vector<ObjectMention>& candidate_mentions,
                                 const std::vector<ObjectSetVariant>& candidate_variants,
                                 const std::vector<ObjectSetVariant>& reference_variants,
                                 EmbeddingBackend& embedder,
                                 EmbeddingCache* cache = nullptr) {
  ScoreReport report;
  std::vector<const ObjectMention*> certain;
  for (const auto& m : candidate_mentions) {
    if (m.uncertain)
      report.excluded_uncertain.push_back(m.phrase);
    else
      certain.push_back(&m);
  }
  if (certain.empty()) {
    report.caption_score = 1.0;
    return report;
  }

  struct Best {
    bool set = false;
    double weight = 0.0;
    std::optional<std::string> matched;
    std::size_t vi = 0, vj = 0;
  };
  std::vector<Best> best(certain.size());

  EmbeddingCache local;
  EmbeddingCache& shared = cache ? *cache : local;

  for (const auto& cv : candidate_variants) {
    std::unordered_map<std::string, std::size_t> row_of;
    for (std::size_t r = 0; r < cv.objects.size(); ++r) row_of.emplace(cv.objects[r], r);

    for (const auto& rv : reference_variants) {
      const SimilarityMatrix matrix = build_similarity_matrix(cv, rv, embedder, &shared);
      const Assignment assignment = hungarian_max(matrix);

      std::vector<double> row_weight(cv.objects.size(), 0.0);
      std::vector<std::optional<std::string>> row_match(cv.objects.size());
      for (const auto& p : assignment.pairs) {
        row_weight[p.row] = p.weight;
        row_match[p.row] = rv.objects[p.col];
      }

      for (std::size_t m = 0; m < certain.size(); ++m) {
        for (const auto& alt : certain[m]->alternatives) {
          auto it = row_of.find(alt);
          if (it == row_of.end()) continue;
          const double w = row_weight[it->second];
          if (!best[m].set || w > best[m].weight) {
            best[m].set = true;
            best[m].weight = w;
            best[m].matched = row_match[it->second];
            best[m].vi = cv.variant_index;
            best[m].vj = rv.variant_index;
          }
        }
      }
    }
  }

  double caption = 1.0;
  for (std::size_t m = 0; m < certain.size(); ++m) {
    ObjectScore s;
    s.phrase = certain[m]->phrase;
    s.score = std::clamp(best[m].weight, 0.0, 1.0);
    s.matched_reference = best[m].matched;
    s.variant_candidate = best[m].vi;
    s.variant_reference = best[m].vj;
    caption = std::min(caption, s.score);
    report.object_scores.push_back(std::move(s));
  }
  report.caption_score = caption;
  return report;
}

}  // namespace aloha
