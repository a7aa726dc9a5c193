#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>

#include "aloha/digest.hpp"
#include "aloha/error.hpp"

namespace aloha {

/// Append-only response cache with an in-memory index. Records are binary:
/// 8-byte key digest, 4-byte little-endian value length, value bytes. A
/// truncated trailing record (crash mid-append) is dropped by truncating the
/// file on open. An empty path keeps the cache purely in memory.
/// Writes serialize internally; reads may run concurrently.
class CacheStore {
 public:
  explicit CacheStore(std::string path = "") : path_(std::move(path)) {
    if (path_.empty()) return;
    load_existing();
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) throw Error("cannot open cache file for append: " + path_);
  }

  static std::uint64_t key(std::string_view backend_id, std::string_view payload) {
    std::uint64_t h = fnv1a64(backend_id);
    h = fnv1a64("\x1f", h);
    return fnv1a64(payload, h);
  }

  std::optional<std::string> get(std::uint64_t digest) const {
    std::shared_lock lock(mu_);
    auto it = entries_.find(digest);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void put(std::uint64_t digest, std::string_view value) {
    std::unique_lock lock(mu_);
    auto [it, inserted] = entries_.emplace(digest, std::string(value));
    if (!inserted) return;  // first write wins; identical by determinism
    if (!out_.is_open()) return;
    char header[12];
    encode_u64(header, digest);
    encode_u32(header + 8, static_cast<std::uint32_t>(value.size()));
    out_.write(header, sizeof(header));
    out_.write(value.data(), static_cast<std::streamsize>(value.size()));
    out_.flush();
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
  }

  std::uint64_t file_bytes() const {
    if (path_.empty()) return 0;
    std::error_code ec;
    auto n = std::filesystem::file_size(path_, ec);
    return ec ? 0 : static_cast<std::uint64_t>(n);
  }

  void clear() {
    std::unique_lock lock(mu_);
    entries_.clear();
    if (path_.empty()) return;
    out_.close();
    std::ofstream truncate(path_, std::ios::binary | std::ios::trunc);
    truncate.close();
    out_.open(path_, std::ios::binary | std::ios::app);
  }

  const std::string& path() const { return path_; }

 private:
  static void encode_u64(char* dst, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) dst[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
  static void encode_u32(char* dst, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) dst[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
  static std::uint64_t decode_u64(const char* src) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i)
      v = (v << 8) | static_cast<unsigned char>(src[i]);
    return v;
  }
  static std::uint32_t decode_u32(const char* src) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
      v = (v << 8) | static_cast<unsigned char>(src[i]);
    return v;
  }

  void load_existing() {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;  // no cache yet
    std::uint64_t good_offset = 0;
    char header[12];
    while (in.read(header, sizeof(header))) {
      const std::uint64_t digest = decode_u64(header);
      const std::uint32_t len = decode_u32(header + 8);
      std::string value(len, '\0');
      if (len > 0 && !in.read(value.data(), len)) break;
      entries_[digest] = std::move(value);
      good_offset += sizeof(header) + len;
    }
    in.close();
    std::error_code ec;
    const auto actual = std::filesystem::file_size(path_, ec);
    if (!ec && actual > good_offset)
      std::filesystem::resize_file(path_, good_offset, ec);
  }

  std::string path_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::uint64_t, std::string> entries_;
  std::ofstream out_;
};

}  // namespace aloha
