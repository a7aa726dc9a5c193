#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace aloha {

// FNV-1a, 64 bit. Used for cache keys, replay transcript keys and derived
// RNG seeds. The constants are fixed by the algorithm, so digests are stable
// across platforms and builds.
inline std::uint64_t fnv1a64(std::string_view data,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

// Combine a global seed with a sample id into a per-sample seed.
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view id) {
  std::uint64_t h = fnv1a64(id);
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(&h), sizeof(h)),
                 global_seed ^ 0x9e3779b97f4a7c15ull);
}

}  // namespace aloha
