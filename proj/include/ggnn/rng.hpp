#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ggnn {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to turn (seed, stream ids...) into independent
/// generator seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives a child seed from a parent seed and a list of stream identifiers.
/// Distinct id tuples give statistically independent streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t id : ids) h = mix64(h ^ mix64(id + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> ids = {}) {
  return Rng(derive_seed(seed, ids));
}

/// Uniform double in [0, 1). Written out instead of std::uniform_real_distribution
/// so that streams are identical across standard library implementations.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace ggnn
