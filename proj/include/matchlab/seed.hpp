#pragma once

#include <cstdint>
#include <random>

namespace matchlab {

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream tags for derive_seed.
enum class Stream : std::uint64_t { kFirstFamily = 1, kSecondFamily = 2, kAuxiliary = 3 };

// Trial key used by the experiment harness: sample size in the high word,
// trial number in the low word. Independent of ladder position, so runs that
// share a master seed and a size draw the same points.
inline constexpr std::uint64_t trial_key(std::uint64_t n, std::uint64_t trial) {
  return (n << 32) | (trial & 0xffffffffULL);
}

// seed = mix64(mix64(mix64(master) ^ trial) ^ stream)
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t trial, Stream stream) {
  return mix64(mix64(mix64(master) ^ trial) ^ static_cast<std::uint64_t>(stream));
}

// Uniform double in [0,1) from the top 53 bits; unlike
// std::uniform_real_distribution this is bit-identical across standard
// libraries.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace matchlab
