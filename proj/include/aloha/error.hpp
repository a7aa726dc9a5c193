#pragma once

#include <stdexcept>
#include <string>

namespace aloha {

// Base class for every error this library raises on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A completion contained no parsable object line.
class MalformedCompletion : public Error {
 public:
  explicit MalformedCompletion(const std::string& msg) : Error(msg) {}
};

// Remote backend could not be reached (after retries were exhausted).
class BackendUnavailable : public Error {
 public:
  explicit BackendUnavailable(const std::string& msg) : Error(msg) {}
};

// Remote backend rejected the credentials.
class AuthError : public Error {
 public:
  explicit AuthError(const std::string& msg) : Error(msg) {}
};

// Remote backend kept answering 429 until retries ran out.
class RateLimited : public Error {
 public:
  explicit RateLimited(const std::string& msg) : Error(msg) {}
};

// Embedding dimensions disagree.
class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};

// Cosine similarity is undefined for an all-zero vector.
class ZeroVector : public Error {
 public:
  explicit ZeroVector(const std::string& msg) : Error(msg) {}
};

// A data file (word vectors, dataset, transcript, vocabulary) is unreadable.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg) : Error(msg) {}
};

// Replay transcript has no entry for the requested prompt (strict mode).
class UnknownPrompt : public Error {
 public:
  explicit UnknownPrompt(const std::string& msg) : Error(msg) {}
};

// Prediction ids and gold ids do not align 1:1.
class IdMismatch : public Error {
 public:
  explicit IdMismatch(const std::string& msg) : Error(msg) {}
};

// Gold labels contain no hallucinated sample, so AP is undefined.
class NoPositives : public Error {
 public:
  explicit NoPositives(const std::string& msg) : Error(msg) {}
};

// No gold sample carries object-level hallucination labels.
class NoLocalizableSamples : public Error {
 public:
  explicit NoLocalizableSamples(const std::string& msg) : Error(msg) {}
};

// Foil vocabulary has fewer classes than the requested rank.
class VocabularyTooSmall : public Error {
 public:
  explicit VocabularyTooSmall(const std::string& msg) : Error(msg) {}
};

// Bad configuration (file contents, flag combinations, missing env).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace aloha
