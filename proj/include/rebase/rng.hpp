#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace rebase {

// splitmix64 finalizer (Steele, Lea, Flood 2014). Bit-exact on every
// platform; the whole simulated backend keys off it.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Folds (seed, salt, path...) into one 64-bit value. Distinct salts give
// independent streams for the same path.
inline std::uint64_t path_hash(std::uint64_t seed,
                               std::span<const std::uint64_t> path,
                               std::uint64_t salt) {
  std::uint64_t h = splitmix64(seed ^ salt);
  for (std::uint64_t id : path) {
    h = splitmix64(h ^ id);
  }
  return h;
}

// Maps 64 random bits to a double in [0, 1). Uses the top 53 bits so the
// result is always strictly below 1, which keeps probability endpoints
// exact (u < p always holds at p = 1, never at p = 0).
inline double unit_uniform(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// FNV-1a over bytes; used to fold string ids into seed derivations.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace rebase
