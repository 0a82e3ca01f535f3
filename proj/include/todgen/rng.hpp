// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>

namespace todgen {

/// SplitMix64 step: advances the state and returns the next output.
/// Fully specified, so results are identical across platforms and runs.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derives an independent seed for item `index` under `master`. Used for
/// per-walk seeding so parallel generation is order-independent.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t state = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  return splitmix64_next(state);
}

/// Minimal deterministic PRNG used everywhere randomness is needed.
/// std::uniform_*_distribution is avoided on purpose: its output is not
/// pinned by the standard, and walk reproducibility is a hard contract.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() { return splitmix64_next(state_); }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform index in [0, n). Modulo bias is negligible for the small n
  /// used here (corpus sizes, list lengths).
  std::size_t next_index(std::size_t n) {
    return n == 0 ? 0 : static_cast<std::size_t>(next() % n);
  }

  /// Uniform integer in [lo, hi] inclusive.
  int next_int(int lo, int hi) {
    if (hi <= lo) return lo;
    return lo + static_cast<int>(next_index(static_cast<std::size_t>(hi - lo + 1)));
  }

 private:
  std::uint64_t state_;
};

/// FNV-1a over bytes; used for stable fingerprints (graph hash, trigram keys).
inline std::uint64_t fnv1a64(const void* data, std::size_t size,
                             std::uint64_t seed = 0xCBF29CE484222325ULL) {
  const unsigned char* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = seed;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

}  // namespace todgen
