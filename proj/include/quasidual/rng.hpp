#pragma once

#include <cstdint>

namespace quasidual {

/// SplitMix64 step (Steele, Lea, Flood). Constants:
///   increment 0x9E3779B97F4A7C15,
///   mix multipliers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB,
///   shifts 30, 27, 31.
std::uint64_t splitmix64(std::uint64_t& state);

/// xoshiro256** generator seeded through SplitMix64. Output scrambler is
/// rotl(s1 * 5, 7) * 9; state update uses shift 17 and rotation 45.
/// Reproducible bit-for-bit on any platform with 64-bit unsigned wraparound.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Independent child stream; advances this generator by one draw.
  Rng split();

 private:
  std::uint64_t s_[4];
};

}  // namespace quasidual
