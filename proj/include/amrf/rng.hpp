#pragma once

#include <cstdint>
#include <random>

namespace amrf {

// Project-wide generator: 64-bit Mersenne Twister seeded directly with the
// caller's seed. Every stochastic routine takes its seed explicitly and owns
// its generator for the duration of the call.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// SplitMix64 finalizer, used to derive independent per-cell seeds.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base ^ (stream + 0x9e3779b97f4a7c15ULL + (base << 6) + (base >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace amrf
