#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>

namespace noisyembed {

/// Counter-based generator: the n-th output is a SplitMix64 finalizer applied
/// to (key + n * golden). Streams derived with split() are independent of the
/// order in which they are consumed, which keeps parallel sweeps reproducible.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(seed ^ mix(stream + kStreamSalt))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + (counter_++) * kGolden); }

  /// Child generator keyed by (this key, stream). Does not advance *this.
  [[nodiscard]] CounterRng split(std::uint64_t stream) const {
    CounterRng child(0);
    child.key_ = mix(key_ ^ mix(stream * kGolden + kStreamSalt));
    return child;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n) {
    // Rejection sampling keeps the draw unbiased and platform independent.
    const std::uint64_t bound = n;
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t x = (*this)();
    while (x >= limit) x = (*this)();
    return static_cast<std::size_t>(x % bound);
  }

  /// Standard normal via Box-Muller. Two uniforms per call; the second
  /// variate is discarded so the stream position stays a pure function of
  /// the call count.
  double normal();

  [[nodiscard]] std::uint64_t counter() const { return counter_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kStreamSalt = 0xD1B54A32D192ED03ULL;

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace noisyembed
