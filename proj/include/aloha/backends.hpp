#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "aloha/digest.hpp"
#include "aloha/error.hpp"
#include "aloha/model.hpp"
#include "aloha/text.hpp"

namespace aloha {

// Completion interface. Temperature 0 calls are treated as deterministic,
// which is what makes response caching sound. Implementations must be safe
// for concurrent calls.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const std::string& prompt, double temperature) = 0;
  virtual std::string id() const = 0;
};

// Text embedding interface. The phrase is normalized before embedding, so
// lookups and cache keys are insensitive to case and outer punctuation.
// embed is deterministic per (id, phrase) and safe for concurrent calls.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual EmbeddingVector embed(const std::string& phrase) = 0;
  virtual std::vector<EmbeddingVector> embed_many(const std::vector<std::string>& phrases) {
    std::vector<EmbeddingVector> out;
    out.reserve(phrases.size());
    for (const auto& p : phrases) out.push_back(embed(p));
    return out;
  }
  virtual std::string id() const = 0;
  virtual std::size_t dimension() const = 0;
};

namespace detail {

// Deterministic unit vector seeded by the phrase digest. mt19937_64 has a
// standard-specified sequence, so the fallback is stable across platforms.
inline EmbeddingVector hash_unit_vector(std::string_view phrase, std::size_t dim) {
  std::mt19937_64 rng(fnv1a64(phrase));
  EmbeddingVector v(dim);
  double norm_sq = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double u = static_cast<double>(rng()) /
                     static_cast<double>(std::numeric_limits<std::uint64_t>::max());
    v[i] = 2.0 * u - 1.0;
    norm_sq += v[i] * v[i];
  }
  const double norm = std::sqrt(norm_sq);
  for (auto& x : v) x /= norm;
  return v;
}

}  // namespace detail

/// Offline embedder over a text file of word vectors ("word v1 v2 ... vK",
/// one word per line). Multi-word phrases embed as the mean of the in-
/// vocabulary word vectors; phrases with no known word fall back to a
/// deterministic hash-seeded unit vector.
class WordVectorEmbedder : public EmbeddingBackend {
 public:
  explicit WordVectorEmbedder(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open word vectors: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      std::istringstream ss(line);
      std::string word;
      ss >> word;
      EmbeddingVector v;
      double x;
      while (ss >> x) v.push_back(x);
      if (!ss.eof())
        throw ParseError(path + ":" + std::to_string(lineno) + ": bad vector entry");
      if (v.empty())
        throw ParseError(path + ":" + std::to_string(lineno) + ": no coordinates");
      if (dim_ == 0) dim_ = v.size();
      if (v.size() != dim_)
        throw ParseError(path + ":" + std::to_string(lineno) +
                         ": inconsistent dimension");
      vectors_.emplace(normalize_phrase(word), std::move(v));
    }
    if (vectors_.empty()) throw ParseError(path + ": no vectors");
    id_ = "wordvec:" + std::filesystem::path(path).filename().string();
  }

  EmbeddingVector embed(const std::string& phrase) override {
    const std::string norm = normalize_phrase(phrase);
    EmbeddingVector acc(dim_, 0.0);
    std::size_t hits = 0;
    for (const auto& token : split_whitespace(norm)) {
      auto it = vectors_.find(token);
      if (it == vectors_.end()) continue;
      for (std::size_t i = 0; i < dim_; ++i) acc[i] += it->second[i];
      ++hits;
    }
    if (hits == 0) return detail::hash_unit_vector(norm, dim_);
    for (auto& x : acc) x /= static_cast<double>(hits);
    return acc;
  }

  std::string id() const override { return id_; }
  std::size_t dimension() const override { return dim_; }
  bool contains(const std::string& word) const {
    return vectors_.count(normalize_phrase(word)) > 0;
  }

 private:
  std::unordered_map<std::string, EmbeddingVector> vectors_;
  std::size_t dim_ = 0;
  std::string id_;
};

/// Degenerate embedder for CHAIR-style binary matching: every distinct
/// normalized phrase gets its own one-hot axis, so cosine similarity is
/// exactly 1 for equal strings and 0 otherwise.
class ExactStringEmbedder : public EmbeddingBackend {
 public:
  explicit ExactStringEmbedder(std::size_t capacity = 4096) : capacity_(capacity) {}

  EmbeddingVector embed(const std::string& phrase) override {
    const std::string norm = normalize_phrase(phrase);
    std::size_t index;
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto [it, inserted] = indices_.emplace(norm, indices_.size());
      index = it->second;
    }
    if (index >= capacity_)
      throw Error("exact-string embedder capacity exceeded (" +
                  std::to_string(capacity_) + " phrases)");
    EmbeddingVector v(capacity_, 0.0);
    v[index] = 1.0;
    return v;
  }

  std::string id() const override { return "exact-string"; }
  std::size_t dimension() const override { return capacity_; }

 private:
  std::size_t capacity_;
  std::mutex mu_;
  std::unordered_map<std::string, std::size_t> indices_;
};

/// Chat backend that replays recorded completions keyed by prompt digest.
/// Transcript format: a JSON object mapping digest hex to completion, or an
/// array of {"digest"|"prompt", "completion"} entries ("prompt" entries are
/// digested at load, which keeps shipped fixtures human-readable).
class ReplayChatBackend : public ChatBackend {
 public:
  enum class Mode { strict, lenient };

  ReplayChatBackend(const std::string& path, Mode mode = Mode::strict,
                    std::string lenient_default = "")
      : mode_(mode), default_(std::move(lenient_default)) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open replay transcript: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ParseError("invalid replay transcript: " + path);
    if (j.is_object() && !j.contains("entries")) {
      for (auto it = j.begin(); it != j.end(); ++it)
        entries_[it.key()] = it.value().get<std::string>();
    } else {
      const nlohmann::json& list = j.is_object() ? j.at("entries") : j;
      for (const auto& e : list) {
        std::string key;
        if (e.contains("digest"))
          key = e.at("digest").get<std::string>();
        else if (e.contains("prompt"))
          key = prompt_digest(e.at("prompt").get<std::string>());
        else
          throw ParseError(path + ": entry without digest or prompt");
        entries_[key] = e.at("completion").get<std::string>();
      }
    }
    id_ = "replay:" + std::filesystem::path(path).filename().string();
  }

  static std::string prompt_digest(const std::string& prompt) {
    return to_hex(fnv1a64(prompt));
  }

  std::string complete(const std::string& prompt, double /*temperature*/) override {
    auto it = entries_.find(prompt_digest(prompt));
    if (it != entries_.end()) return it->second;
    if (mode_ == Mode::strict)
      throw UnknownPrompt("replay transcript has no entry for prompt digest " +
                          prompt_digest(prompt));
    return default_;
  }

  std::string id() const override { return id_; }

 private:
  Mode mode_;
  std::string default_;
  std::unordered_map<std::string, std::string> entries_;
  std::string id_;
};

}  // namespace aloha
