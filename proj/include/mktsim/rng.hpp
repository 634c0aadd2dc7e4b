#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

// Deterministic random number machinery. Everything here is pinned to a
// documented algorithm so that runs reproduce bit-for-bit across builds:
//
//   * generator:   SplitMix64 (Steele, Lea, Flood 2014), one 64-bit state
//   * substreams:  derived by hashing (seed, label, indices) with the
//                  SplitMix64 finalizer, so draws keyed by (member, tick, ...)
//                  do not depend on evaluation order
//   * doubles:     53 high bits mapped to [0,1)
//   * shuffling:   Fisher-Yates with rejection-sampled bounded integers
//
// std::shuffle and the <random> distributions are implementation-defined and
// are deliberately not used.

namespace mktsim {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer: bijective 64-bit mix.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

// FNV-1a over the label bytes; folds task names into seed derivation.
inline constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// Combines a master seed with a label and up to three indices into a new
// stream seed: seed' = mix(mix(mix(seed + fnv(label)) + a*G) + b*G) ... with
// G the golden-ratio increment. Used for per-task, per-rep and per-event
// substreams.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view label,
                                           std::uint64_t a = 0, std::uint64_t b = 0,
                                           std::uint64_t c = 0) {
  using namespace detail;
  std::uint64_t h = mix64(seed + fnv1a(label));
  h = mix64(h + kGolden * (a + 1));
  h = mix64(h + kGolden * (b + 1));
  h = mix64(h + kGolden * (c + 1));
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += detail::kGolden;
    return detail::mix64(state_);
  }

  // Uniform on [0,1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on {0, 1, ..., n-1} via rejection; exact for any n >= 1.
  std::uint64_t bounded(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t threshold = (0ULL - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  bool bernoulli(double p) { return next_double() < p; }

  // Standard normal via Box-Muller (both uniforms always consumed).
  double normal() {
    double u1 = next_double();
    const double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Poisson by Knuth's product-of-uniforms; large means are split into
  // chunks of 500 to avoid exp() underflow.
  std::uint64_t poisson(double mean) {
    std::uint64_t total = 0;
    while (mean > 500.0) {
      total += poisson_small(500.0);
      mean -= 500.0;
    }
    return total + poisson_small(mean);
  }

  // Fisher-Yates; identical results on any platform given the same seed.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t poisson_small(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= next_double();
    } while (p > limit);
    return k - 1;
  }

  std::uint64_t state_;
};

// One keyed uniform draw in [0,1) without carrying generator state; used for
// per-request decisions so outcomes are independent of processing order.
inline double keyed_uniform(std::uint64_t seed, std::string_view label, std::uint64_t a,
                            std::uint64_t b = 0, std::uint64_t c = 0) {
  return static_cast<double>(derive_seed(seed, label, a, b, c) >> 11) * 0x1.0p-53;
}

// k distinct indices sampled uniformly from {0,...,n-1} by partial
// Fisher-Yates, returned in the order drawn.
inline std::vector<int> sample_indices(int n, int k, Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

}  // namespace mktsim
