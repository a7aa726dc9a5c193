#pragma once

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstring>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "aloha/backends.hpp"
#include "aloha/cache.hpp"
#include "aloha/config.hpp"
#include "aloha/error.hpp"

namespace aloha {

namespace detail {

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // /v1/...
};

inline SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("endpoint URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

inline httplib::Headers auth_headers(const std::string& api_key_env) {
  httplib::Headers headers;
  if (auto key = api_key_from_env(api_key_env)) {
    headers.emplace("Authorization", "Bearer " + *key);
  }
  return headers;
}

// POST with retries and exponential backoff on transient failures
// (connection errors, 429, 5xx). 401/403 fail immediately as AuthError.
inline std::string post_json_with_retries(const std::string& url,
                                          const std::string& api_key_env,
                                          const std::string& body, int max_retries,
                                          int backoff_ms) {
  const SplitUrl split = split_url(url);
  httplib::Client client(split.base);
  client.set_connection_timeout(10, 0);
  client.set_read_timeout(120, 0);
  const httplib::Headers headers = auth_headers(api_key_env);

  int delay_ms = backoff_ms;
  bool saw_rate_limit = false;
  std::string last_error;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      delay_ms *= 2;
    }
    auto res = client.Post(split.path, headers, body, "application/json");
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return res->body;
    if (res->status == 401 || res->status == 403)
      throw AuthError("endpoint " + url + " rejected credentials (" +
                      std::to_string(res->status) + ")");
    if (res->status == 429) {
      saw_rate_limit = true;
      last_error = "rate limited (429)";
      continue;
    }
    if (res->status >= 500) {
      last_error = "server error (" + std::to_string(res->status) + ")";
      continue;
    }
    throw BackendUnavailable("endpoint " + url + " answered " +
                             std::to_string(res->status) + ": " + res->body);
  }
  if (saw_rate_limit)
    throw RateLimited("endpoint " + url + " still rate limited after " +
                      std::to_string(max_retries) + " retries");
  throw BackendUnavailable("endpoint " + url + " unreachable: " + last_error);
}

// The assembled prompt starts with the rule block and switches to the
// example/query layout at the first caption block; that boundary is where
// the chat wire format splits system and user content.
inline std::pair<std::string, std::string> split_system_user(const std::string& prompt) {
  const auto at = prompt.find("\n\nCaption");
  if (at == std::string::npos) return {"", prompt};
  return {prompt.substr(0, at), prompt.substr(at + 2)};
}

}  // namespace detail

/// Chat-completion HTTP backend: POST {model, temperature, messages} and
/// read the first choice's message content. Responses are cached by
/// (backend id, prompt, temperature); a warm cache performs no network
/// calls. Concurrent identical requests coalesce onto one call.
class HttpChatBackend : public ChatBackend {
 public:
  HttpChatBackend(ChatEndpointConfig config, CacheStore* cache = nullptr,
                  int max_retries = 3, int backoff_ms = 250)
      : config_(std::move(config)), cache_(cache), max_retries_(max_retries),
        backoff_ms_(backoff_ms) {}

  std::string complete(const std::string& prompt, double temperature) override {
    const std::string payload = prompt + '\x1f' + format_score(temperature);
    const std::uint64_t key = CacheStore::key(id(), payload);
    if (cache_) {
      if (auto hit = cache_->get(key)) return *hit;
    }
    std::lock_guard<std::mutex> lock(mu_);
    if (cache_) {
      if (auto hit = cache_->get(key)) return *hit;  // coalesced with a peer
    }
    const auto [system, user] = detail::split_system_user(prompt);
    nlohmann::json messages = nlohmann::json::array();
    if (!system.empty())
      messages.push_back({{"role", "system"}, {"content", system}});
    messages.push_back({{"role", "user"}, {"content", user}});
    const nlohmann::json body{{"model", config_.model},
                              {"temperature", temperature},
                              {"messages", std::move(messages)}};
    const std::string raw = detail::post_json_with_retries(
        config_.url, config_.api_key_env, body.dump(), max_retries_, backoff_ms_);
    std::string text;
    try {
      const nlohmann::json parsed = nlohmann::json::parse(raw);
      text = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("unexpected chat response shape: " + std::string(e.what()));
    }
    if (cache_) cache_->put(key, text);
    return text;
  }

  std::string id() const override {
    return "chat:" + config_.model + "@" + config_.url;
  }

 private:
  ChatEndpointConfig config_;
  CacheStore* cache_;
  int max_retries_;
  int backoff_ms_;
  std::mutex mu_;
};

/// Embedding HTTP backend: POST {model, input: [...]} and read the response
/// "data" as an ordered vector list. Batches respect the configured maximum
/// and only cache-missing phrases go on the wire.
class HttpEmbeddingBackend : public EmbeddingBackend {
 public:
  HttpEmbeddingBackend(EmbeddingEndpointConfig config, CacheStore* cache = nullptr,
                       int max_retries = 3, int backoff_ms = 250)
      : config_(std::move(config)), cache_(cache), max_retries_(max_retries),
        backoff_ms_(backoff_ms) {
    if (config_.batch_size == 0) config_.batch_size = 1;
  }

  EmbeddingVector embed(const std::string& phrase) override {
    return embed_many({phrase}).front();
  }

  std::vector<EmbeddingVector> embed_many(const std::vector<std::string>& phrases) override {
    std::vector<EmbeddingVector> out(phrases.size());
    std::vector<std::string> norms(phrases.size());
    for (std::size_t i = 0; i < phrases.size(); ++i)
      norms[i] = normalize_phrase(phrases[i]);

    std::lock_guard<std::mutex> lock(mu_);
    std::vector<std::string> missing;
    for (const auto& n : norms) {
      if (lookup(n)) continue;
      if (std::find(missing.begin(), missing.end(), n) == missing.end())
        missing.push_back(n);
    }
    for (std::size_t at = 0; at < missing.size(); at += config_.batch_size) {
      const std::size_t end = std::min(missing.size(), at + config_.batch_size);
      fetch_batch({missing.begin() + static_cast<std::ptrdiff_t>(at),
                   missing.begin() + static_cast<std::ptrdiff_t>(end)});
    }
    for (std::size_t i = 0; i < norms.size(); ++i) {
      auto hit = lookup(norms[i]);
      if (!hit)
        throw BackendUnavailable("embedding for \"" + norms[i] + "\" missing from response");
      out[i] = std::move(*hit);
    }
    return out;
  }

  std::string id() const override {
    return "embed:" + config_.model + "@" + config_.url;
  }

  std::size_t dimension() const override {
    return config_.dimension != 0 ? config_.dimension : seen_dimension_;
  }

 private:
  std::optional<EmbeddingVector> lookup(const std::string& norm) const {
    if (!cache_) {
      auto it = local_.find(norm);
      if (it == local_.end()) return std::nullopt;
      return it->second;
    }
    auto hit = cache_->get(CacheStore::key(id(), norm));
    if (!hit) return std::nullopt;
    return decode(*hit);
  }

  void store(const std::string& norm, const EmbeddingVector& v) {
    if (cache_)
      cache_->put(CacheStore::key(id(), norm), encode(v));
    else
      local_[norm] = v;
  }

  void fetch_batch(const std::vector<std::string>& batch) {
    if (batch.empty()) return;
    const nlohmann::json body{{"model", config_.model}, {"input", batch}};
    const std::string raw = detail::post_json_with_retries(
        config_.url, config_.api_key_env, body.dump(), max_retries_, backoff_ms_);
    std::vector<EmbeddingVector> vectors;
    try {
      const nlohmann::json parsed = nlohmann::json::parse(raw);
      for (const auto& item : parsed.at("data"))
        vectors.push_back(item.at("embedding").get<EmbeddingVector>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("unexpected embedding response shape: " + std::string(e.what()));
    }
    if (vectors.size() != batch.size())
      throw BackendUnavailable("embedding response count mismatch");
    for (std::size_t i = 0; i < batch.size(); ++i) {
      check_dimension(vectors[i].size());
      store(batch[i], vectors[i]);
    }
  }

  void check_dimension(std::size_t dim) {
    if (config_.dimension != 0 && dim != config_.dimension)
      throw DimensionMismatch("server returned dimension " + std::to_string(dim) +
                              ", configured " + std::to_string(config_.dimension));
    if (seen_dimension_ == 0) seen_dimension_ = dim;
    if (dim != seen_dimension_)
      throw DimensionMismatch("server changed embedding dimension");
  }

  // Vectors persist in the cache as little-endian IEEE-754 doubles.
  static std::string encode(const EmbeddingVector& v) {
    std::string out;
    out.reserve(v.size() * sizeof(double));
    for (double x : v) {
      auto bits = std::bit_cast<std::uint64_t>(x);
      for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
    return out;
  }
  static EmbeddingVector decode(const std::string& raw) {
    EmbeddingVector v(raw.size() / sizeof(double));
    for (std::size_t k = 0; k < v.size(); ++k) {
      std::uint64_t bits = 0;
      for (int i = 7; i >= 0; --i)
        bits = (bits << 8) |
               static_cast<unsigned char>(raw[k * 8 + static_cast<std::size_t>(i)]);
      v[k] = std::bit_cast<double>(bits);
    }
    return v;
  }

  EmbeddingEndpointConfig config_;
  CacheStore* cache_;
  int max_retries_;
  int backoff_ms_;
  std::mutex mu_;
  std::size_t seen_dimension_ = 0;
  std::unordered_map<std::string, EmbeddingVector> local_;
};

}  // namespace aloha
