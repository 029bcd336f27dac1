#pragma once

#include <cstdint>

namespace aggrisk {

/// splitmix64 generator (Vigna's constants). Every random value emitted by
/// the data generator comes from this stream, so a fixed seed reproduces
/// datasets bit for bit on any platform.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1), 53 mantissa bits.
  double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound). Plain modulo: the small bias is
  /// irrelevant for synthetic data and keeps the stream trivially portable.
  std::uint64_t next_below(std::uint64_t bound) { return next() % bound; }

 private:
  std::uint64_t state_;
};

/// Substream k of a master seed: the (k+1)-th output of SplitMix64(seed),
/// used as the initial state of an independent stream. Keeps the table
/// generators decoupled so changing one table's row count does not shift
/// the values of the others.
inline SplitMix64 substream(std::uint64_t seed, std::uint64_t index) {
  SplitMix64 root(seed);
  std::uint64_t state = 0;
  for (std::uint64_t i = 0; i <= index; ++i) state = root.next();
  return SplitMix64(state);
}

/// FNV-1a 64-bit, used for dataset manifest hashes in report metadata.
inline std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace aggrisk
