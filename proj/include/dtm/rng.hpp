#pragma once

#include <cstdint>
#include <initializer_list>

namespace dtm {

/// SplitMix64 finalizer. Used both as a stream generator and as the stable
/// hash for deriving substream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stable hash of a sequence of integers; identical on every platform.
constexpr std::uint64_t stable_hash(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t p : parts) h = mix64(h ^ mix64(p + 0x9e3779b97f4a7c15ULL));
  return h;
}

/// Purposes for per-vehicle substreams. Changing one purpose's draws never
/// shifts another's.
enum class StreamPurpose : std::uint64_t { population = 1, compliance = 2, comms_loss = 3 };

/// Small portable generator (SplitMix64). Conversions to double and to
/// bounded integers are done here rather than through <random>
/// distributions, whose output differs between standard libraries.
class RandomStream {
 public:
  constexpr explicit RandomStream(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr RandomStream derive(std::uint64_t seed, std::uint64_t id, StreamPurpose purpose) {
    return RandomStream(stable_hash({seed, id, static_cast<std::uint64_t>(purpose)}));
  }

  constexpr std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  /// Uniform in [0, 1) with 53 bits of resolution.
  constexpr double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound), bound > 0. Rejection sampling, no modulo bias.
  constexpr std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % bound;
  }

  /// Uniform integer in [lo, hi].
  constexpr std::int64_t between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  constexpr std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace dtm
