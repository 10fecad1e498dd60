#include "semsparse/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace semsparse {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key) {
  return splitmix64(seed ^ splitmix64(key ^ 0xD1B54A32D192ED03ULL));
}

namespace {

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& word : s_) {
    x += 0x9E3779B97F4A7C15ULL;
    word = splitmix64(x);
  }
}

SeededRng SeededRng::derive(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t s = seed;
  for (std::uint64_t k : keys) s = mix_seed(s, k);
  return SeededRng(s);
}

std::uint64_t SeededRng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double SeededRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double SeededRng::uniform_open() {
  return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
}

std::uint64_t SeededRng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("SeededRng::below: empty range");
  // Lemire's multiply-and-reject.
  unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(next_u64()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

bool SeededRng::bernoulli(double p) { return uniform() < p; }

double SeededRng::normal() {
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double SeededRng::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw std::invalid_argument("SeededRng::gamma: shape and rate must be positive");
  if (shape < 1.0) return std::exp(log_gamma(shape, rate));
  // Marsaglia & Tsang.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v / rate;
  }
}

double SeededRng::log_gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw std::invalid_argument("SeededRng::log_gamma: shape and rate must be positive");
  if (shape >= 1.0) return std::log(gamma(shape, rate));
  // Gamma(a) = Gamma(a + 1) * U^(1/a), kept in log space for tiny shapes.
  const double g = gamma(shape + 1.0, 1.0);
  return std::log(g) + std::log(uniform_open()) / shape - std::log(rate);
}

double SeededRng::beta(double a, double b) {
  const double lx = log_gamma(a, 1.0);
  const double ly = log_gamma(b, 1.0);
  return 1.0 / (1.0 + std::exp(ly - lx));
}

std::uint64_t SeededRng::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw std::invalid_argument("SeededRng::poisson: mean must be finite and non-negative");
  if (mean == 0.0) return 0;
  if (mean < kPoissonNormalCutoff) {
    const double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::uint64_t k = 0;
    while (u >= cdf && k < 1000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }
  const double x = std::floor(mean + std::sqrt(mean) * normal() + 0.5);
  return x <= 0.0 ? 0 : static_cast<std::uint64_t>(x);
}

}  // namespace semsparse
