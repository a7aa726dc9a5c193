#pragma once

#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "aloha/error.hpp"

namespace aloha {

struct ChatEndpointConfig {
  std::string url;    // full URL including path
  std::string model;
  std::string api_key_env = "ALOHA_API_KEY";
};

struct EmbeddingEndpointConfig {
  std::string url;
  std::string model;
  std::string api_key_env = "ALOHA_API_KEY";
  std::size_t dimension = 0;  // 0 = accept the first dimension the server returns
  std::size_t batch_size = 64;
};

// Run-wide configuration. Flags override file values; API keys come only
// from the environment, never from the file.
struct RunConfig {
  std::optional<ChatEndpointConfig> chat;
  std::optional<EmbeddingEndpointConfig> embedding;
  std::string cache_path;
  std::string word_vectors;
  std::string prompt_bundle;    // optional override file
  std::size_t combination_cap = 128;
  double threshold = 0.5;
  int jobs = 0;                 // 0 = hardware concurrency
  std::size_t foil_rank = 10;
  int max_retries = 3;
  int backoff_ms = 250;

  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("invalid JSON config: " + path);
    RunConfig c;
    try {
      if (j.contains("chat")) {
        ChatEndpointConfig chat;
        chat.url = j["chat"].at("endpoint").get<std::string>();
        chat.model = j["chat"].at("model").get<std::string>();
        if (j["chat"].contains("api_key_env"))
          chat.api_key_env = j["chat"]["api_key_env"].get<std::string>();
        c.chat = std::move(chat);
      }
      if (j.contains("embedding")) {
        EmbeddingEndpointConfig emb;
        emb.url = j["embedding"].at("endpoint").get<std::string>();
        emb.model = j["embedding"].at("model").get<std::string>();
        if (j["embedding"].contains("api_key_env"))
          emb.api_key_env = j["embedding"]["api_key_env"].get<std::string>();
        if (j["embedding"].contains("dimension"))
          emb.dimension = j["embedding"]["dimension"].get<std::size_t>();
        if (j["embedding"].contains("batch_size"))
          emb.batch_size = j["embedding"]["batch_size"].get<std::size_t>();
        c.embedding = std::move(emb);
      }
      if (j.contains("cache_path")) c.cache_path = j["cache_path"].get<std::string>();
      if (j.contains("word_vectors"))
        c.word_vectors = j["word_vectors"].get<std::string>();
      if (j.contains("prompt_bundle"))
        c.prompt_bundle = j["prompt_bundle"].get<std::string>();
      if (j.contains("combination_cap"))
        c.combination_cap = j["combination_cap"].get<std::size_t>();
      if (j.contains("threshold")) c.threshold = j["threshold"].get<double>();
      if (j.contains("jobs")) c.jobs = j["jobs"].get<int>();
      if (j.contains("foil_rank")) c.foil_rank = j["foil_rank"].get<std::size_t>();
      if (j.contains("max_retries")) c.max_retries = j["max_retries"].get<int>();
      if (j.contains("backoff_ms")) c.backoff_ms = j["backoff_ms"].get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + ": " + e.what());
    }
    return c;
  }
};

inline std::optional<std::string> api_key_from_env(const std::string& env_name) {
  if (env_name.empty()) return std::nullopt;
  const char* v = std::getenv(env_name.c_str());
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

}  // namespace aloha
