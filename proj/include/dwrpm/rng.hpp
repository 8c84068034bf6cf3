#pragma once

#include <cstdint>

namespace dwrpm {

/// Deterministic pseudo-random generator (xoshiro256**).
///
/// The 256-bit state is expanded from (seed, stream) with SplitMix64, so two
/// generators built from the same pair produce the same sequence on every
/// platform. Distinct stream indices give statistically independent
/// sequences from one user-visible seed. Floating-point draws are derived
/// with explicit integer arithmetic and Box-Muller, never through
/// <random> distributions, whose output differs between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// A new generator on another stream of the same seed.
  Rng split(std::uint64_t stream) const { return Rng(seed_, stream); }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer on [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal draw.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t s_[4];
};

}  // namespace dwrpm
