#pragma once

#include <cstdint>
#include <initializer_list>

namespace semsparse {

// SplitMix64 finalizer; used for seeding and for counter-based key mixing.
std::uint64_t splitmix64(std::uint64_t x);

// Derives a child seed from a parent seed and a key. Streams derived from
// distinct (seed, key) pairs are independent for practical purposes.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key);

/// Portable random stream: xoshiro256** seeded through SplitMix64.
///
/// All distributions are implemented here rather than taken from <random>,
/// whose distribution algorithms are implementation-defined. Identical seeds
/// give identical streams on every platform with IEEE doubles.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  // Counter-based substream, e.g. derive(seed, {sweep, patch}).
  static SeededRng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  double uniform();       // [0, 1)
  double uniform_open();  // (0, 1)
  std::uint64_t below(std::uint64_t n);  // uniform in [0, n), unbiased
  bool bernoulli(double p);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  double gamma(double shape, double rate);
  double log_gamma(double shape, double rate);  // log of a Gamma(shape, rate) draw
  double beta(double a, double b);

  // Inversion below kPoissonNormalCutoff, rounded normal approximation above.
  std::uint64_t poisson(double mean);
  static constexpr double kPoissonNormalCutoff = 30.0;

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

}  // namespace semsparse
