#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace smurf {

/// Draws are built directly on the 64-bit engine so that seeded streams are
/// identical across standard library implementations.
using Rng = std::mt19937_64;

/// Uniform integer in [0, bound).
inline std::uint64_t draw_below(Rng& rng, std::uint64_t bound) {
  constexpr auto top = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = top - top % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % bound;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Derived seed for stream `stream` of a base seed (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace smurf
