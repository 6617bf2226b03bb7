// Independent re-implementation of the splitmix64 finalizer used by the
// library, written from the published constants rather than by including
// rebase/rng.hpp, so tests can cross-check the two.
#pragma once

#include <cstdint>

namespace reference {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += UINT64_C(0x9E3779B97F4A7C15);
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
  z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
  return z ^ (z >> 31);
}

// One finalizer application with the increment folded in up front; matches a
// single next() call from the given seed.
inline std::uint64_t splitmix64_once(std::uint64_t seed) {
  std::uint64_t state = seed;
  return splitmix64_next(state);
}

}  // namespace reference
