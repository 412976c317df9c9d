#pragma once

#include <cstdint>
#include <random>

namespace spillover {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Seed of an independent stream, a pure function of (seed, stream, substream) so results do
// not depend on the order or thread in which streams are consumed.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0) {
  return mix64(mix64(mix64(seed) ^ stream) ^ (substream * 0xD1B54A32D192ED03ULL));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0) {
  return Rng(stream_seed(seed, stream, substream));
}

// Uniform double in [0, 1) from the top 53 bits; identical across standard libraries.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace spillover
