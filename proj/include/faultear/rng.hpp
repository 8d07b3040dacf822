// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0
//
// Seedable, portable random number generation. All randomness in the
// project flows through Rng (xoshiro256++ seeded via splitmix64) so that
// identical seeds give bit-identical streams on every platform. The
// standard <random> distributions are implementation-defined and must not
// be used anywhere results need to be reproducible.

#pragma once

#include <cmath>
#include <cstdint>

namespace faultear {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Mixes an arbitrary list of 64-bit values into one seed word. Used to
// derive independent per-clip / per-epoch / per-batch streams from a
// single user-facing seed.
inline std::uint64_t mix_seed(std::uint64_t a) {
  std::uint64_t s = a;
  return splitmix64(s);
}
template <typename... Rest>
inline std::uint64_t mix_seed(std::uint64_t a, Rest... rest) {
  std::uint64_t s = a ^ (mix_seed(static_cast<std::uint64_t>(rest)...) +
                         0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  return splitmix64(s);
}

// xoshiro256++ (Blackman & Vigna). Small state, long period, and trivially
// portable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  // Integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling to avoid modulo bias.
    const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller. One value per call; the partner value
  // is cached.
  double gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    // Guard against log(0).
    while (u1 <= 0.0) u1 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// Fisher-Yates shuffle with a caller-owned Rng, so shuffles are portable.
template <typename Container>
void shuffle(Container& items, Rng& rng) {
  const std::size_t n = items.size();
  if (n < 2) return;
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
    auto tmp = items[i];
    items[i] = items[j];
    items[j] = tmp;
  }
}

}  // namespace faultear
