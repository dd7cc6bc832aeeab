#pragma once

#include <cstdint>
#include <random>

namespace qmdp {

using Rng = std::mt19937_64;

// splitmix64 finalizer; decorrelates (seed, stream) pairs before seeding.
inline std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent substream `stream` of the master `seed`. Used per episode and
/// per (state, action) row so parallel and serial runs draw identical numbers.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  return Rng(mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x632be59bd9b4e019ULL)));
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace qmdp
