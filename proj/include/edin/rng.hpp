#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace edin {

// SplitMix64: the project-wide deterministic PRNG. 64-bit state, one
// multiply-xor-shift chain per draw, splittable by reseeding with a derived
// key. Every stage derives its own substream from the run seed and a stage
// name, so splits, graph levels and synthetic corpora reproduce bit-exactly
// across platforms.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Unbiased bounded draw by rejection.
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound == 0) return 0;
    const std::uint64_t threshold = (0ULL - bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Uniform in [0, 1), 53-bit mantissa.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Open interval (0, 1); safe as a log() argument.
  double next_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Box-Muller, one value per call (the spare is discarded to keep the
  // stream position independent of call pairing).
  double next_gaussian() {
    const double u = next_open();
    const double v = next_double();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586477 * v);
  }

  // Derives a named substream: FNV-1a of the name mixed into the seed.
  static SplitMix64 substream(std::uint64_t seed, std::string_view name) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : name) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001B3ULL;
    }
    SplitMix64 mixer(seed ^ h);
    return SplitMix64(mixer.next_u64());
  }

 private:
  std::uint64_t state_;
};

// Fisher-Yates over indices 0..n-1.
inline std::vector<std::size_t> shuffled_indices(std::size_t n,
                                                 SplitMix64& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace edin
