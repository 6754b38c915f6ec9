#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <vector>

#include "agmax/error.hpp"

namespace agmax {

/**
 * Splittable counter-based pseudo-random stream.
 *
 * A stream is a 64-bit key plus a draw counter; each output is a hash of
 * (key, counter). split(i) derives an independent child stream from (key, i)
 * without advancing the parent, so a fixed tree of splits always yields the
 * same values regardless of evaluation order. This is the determinism
 * backbone of the whole pipeline: every stochastic component receives its own
 * substream.
 */
class RngStream {
public:
  explicit RngStream(std::uint64_t seed) : key_(mix(seed ^ kSeedDomain)) {}

  /// Independent child stream; does not advance this stream.
  RngStream split(std::uint64_t index) const {
    return RngStream(from_key_tag{}, mix(key_ ^ mix(index + kSplitDomain)));
  }

  std::uint64_t next_u64() { return mix(key_ ^ mix(counter_++ + kDrawDomain)); }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in {0, ..., n-1}; unbiased via rejection. n must be > 0.
  std::size_t next_below(std::size_t n) {
    if (n == 0) throw Error("RngStream::next_below: n must be positive");
    const std::uint64_t bound = n;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t draw = next_u64();
    while (draw >= limit) draw = next_u64();
    return static_cast<std::size_t>(draw % bound);
  }

  bool next_bernoulli(double p) { return next_double() < p; }

  /// Standard normal via Box-Muller; consumes exactly two draws.
  double next_gaussian() {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /**
   * Gamma(shape, 1) via Marsaglia-Tsang squeeze; the shape < 1 case is
   * boosted through Gamma(shape + 1) * U^(1/shape).
   */
  double next_gamma(double shape) {
    if (shape <= 0.0) throw Error("RngStream::next_gamma: shape must be positive");
    if (shape < 1.0) {
      const double u = std::max(next_double(), 1e-300);
      return next_gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = next_gaussian();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = next_double();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
        return d * v;
      }
    }
  }

  /// Beta(a, b) as X/(X+Y) for independent gammas.
  double next_beta(double a, double b) {
    const double x = next_gamma(a);
    const double y = next_gamma(b);
    return x / (x + y);
  }

  /// Uniform random permutation of {0, ..., n-1} (Fisher-Yates).
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
      std::swap(perm[i - 1], perm[next_below(i)]);
    }
    return perm;
  }

private:
  struct from_key_tag {};
  RngStream(from_key_tag, std::uint64_t key) : key_(key) {}

  // splitmix64 finalizer; full-avalanche 64-bit mix.
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t kSeedDomain = 0xA0761D6478BD642Full;
  static constexpr std::uint64_t kSplitDomain = 0xE7037ED1A0B428DBull;
  static constexpr std::uint64_t kDrawDomain = 0x8EBC6AF09C88C6E3ull;

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace agmax
