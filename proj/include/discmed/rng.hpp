#pragma once

// Counter-based random numbers.
//
// Every draw is a pure function of (key, index): a stream key is derived by
// hashing a master seed with any number of tags (slice index, step, ...), and
// element i of the stream is the i-th SplitMix64 output for that key. Nothing
// is stateful, so the fill order of a parallel loop cannot change a result.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace discmed::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derive a child key from a parent key and a tag.
constexpr std::uint64_t derive(std::uint64_t key, std::uint64_t tag) {
  return mix64(key ^ mix64(tag + kGolden));
}

template <class... Tags>
constexpr std::uint64_t derive(std::uint64_t key, std::uint64_t tag, Tags... rest) {
  return derive(derive(key, tag), static_cast<std::uint64_t>(rest)...);
}

/// Uniform double in [0, 1) with 53 random bits.
constexpr double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

class Stream {
 public:
  constexpr explicit Stream(std::uint64_t key) : key_(key) {}

  constexpr std::uint64_t key() const { return key_; }

  constexpr std::uint64_t bits(std::uint64_t i) const {
    return mix64(key_ + (i + 1) * kGolden);
  }

  /// [0, 1)
  constexpr double uniform(std::uint64_t i) const { return to_unit(bits(i)); }

  /// Standard normal via Box-Muller (cosine branch) on counters 2i and 2i+1.
  double normal(std::uint64_t i) const {
    const double u1 = 1.0 - uniform(2 * i);  // (0, 1]
    const double u2 = uniform(2 * i + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_;
};

}  // namespace discmed::rng
