#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "aloha/extraction.hpp"
#include "aloha/filtering.hpp"
#include "aloha/matching.hpp"
#include "aloha/model.hpp"

namespace aloha {

struct PipelineOptions {
  std::size_t combination_cap = 128;
};

struct CaptionScoring {
  ScoreReport report;
  std::vector<ObjectMention> candidate_mentions;  // pre-filter, as extracted
};

/// The full scoring pipeline for one caption: extract candidate and
/// reference objects, augment reference root nouns, expand conjunction
/// variants (dropping uncertain candidate objects), merge detector labels
/// into the references, then score by maximum-similarity assignment.
inline CaptionScoring score_caption_detailed(const std::string& candidate,
                                             const std::vector<std::string>& references,
                                             const std::vector<std::string>& detections,
                                             ObjectExtractor& extractor,
                                             EmbeddingBackend& embedder,
                                             EmbeddingCache* cache = nullptr,
                                             const PipelineOptions& options = {}) {
  CaptionScoring out;
  ExtractorRequest candidate_request{{candidate}, ExtractMode::candidate};
  out.candidate_mentions = extractor.extract(candidate_request);

  std::vector<ObjectMention> reference_mentions;
  if (!references.empty()) {
    ExtractorRequest reference_request{references, ExtractMode::references};
    reference_mentions = extractor.extract(reference_request);
  }
  reference_mentions = augment_root_nouns(reference_mentions);

  auto candidate_variants = expand_variants(out.candidate_mentions, Origin::candidate,
                                            options.combination_cap);
  auto reference_variants =
      expand_variants(reference_mentions, Origin::reference, options.combination_cap);
  reference_variants =
      merge_detections(std::move(reference_variants), ingest_detections(detections));

  out.report = score_objects(out.candidate_mentions, candidate_variants,
                             reference_variants, embedder, cache);
  return out;
}

inline ScoreReport score_caption(const std::string& candidate,
                                 const std::vector<std::string>& references,
                                 const std::vector<std::string>& detections,
                                 ObjectExtractor& extractor,
                                 EmbeddingBackend& embedder,
                                 EmbeddingCache* cache = nullptr,
                                 const PipelineOptions& options = {}) {
  return score_caption_detailed(candidate, references, detections, extractor,
                                embedder, cache, options)
      .report;
}

/// Run fn(i) for i in [0, count) on a bounded worker pool. The first thrown
/// exception is rethrown on the caller thread after all workers join.
inline void parallel_for(std::size_t count, int jobs,
                         const std::function<void(std::size_t)>& fn) {
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;
  jobs = std::min<int>(jobs, static_cast<int>(std::max<std::size_t>(count, 1)));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(jobs));
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

struct ScoredSample {
  const EvalSample* sample = nullptr;
  ScoreReport report;
  std::vector<std::string> candidate_phrases;  // as extracted, pre-filter
};

/// Score every sample, in parallel, returning results ordered by sample_id
/// regardless of completion order.
inline std::vector<ScoredSample> score_dataset(const std::vector<EvalSample>& samples,
                                               ObjectExtractor& extractor,
                                               EmbeddingBackend& embedder,
                                               EmbeddingCache* cache, int jobs,
                                               const PipelineOptions& options = {}) {
  std::vector<ScoredSample> results(samples.size());
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    auto scored = score_caption_detailed(samples[i].candidate, samples[i].references,
                                         samples[i].detections, extractor, embedder,
                                         cache, options);
    results[i].sample = &samples[i];
    results[i].report = std::move(scored.report);
    for (const auto& m : scored.candidate_mentions)
      results[i].candidate_phrases.push_back(m.phrase);
  });
  std::sort(results.begin(), results.end(),
            [](const ScoredSample& a, const ScoredSample& b) {
              return a.sample->sample_id < b.sample->sample_id;
            });
  return results;
}

}  // namespace aloha
