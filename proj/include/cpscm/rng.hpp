// SPDX-License-Identifier: Apache-2.0
//
// Counter-based random substreams. Every draw site derives its own key from
// the master seed and a fixed integer path, so the numbers a site sees do not
// depend on evaluation order or thread scheduling. A given (seed, path) pair
// is bit-reproducible across runs and platforms with IEEE doubles.
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <utility>

namespace cpscm::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}

constexpr std::uint64_t derive_key(std::uint64_t base,
                                   std::initializer_list<std::uint64_t> path) {
  std::uint64_t k = mix64(base + kGolden);
  for (std::uint64_t p : path) k = mix64(k ^ mix64(p + kGolden));
  return k;
}

// Purpose tags keep unrelated draw sites on disjoint substreams even when the
// rest of the path coincides.
enum : std::uint64_t {
  kChannelDraw = 0x11,
  kNoiseDraw = 0x22,
  kSymbolBits = 0x33,
  kTrialKey = 0x44,
  kWishartDraw = 0x55,
  kAnalysisDraw = 0x66,
};

class Substream {
 public:
  explicit constexpr Substream(std::uint64_t key) : state_(key) {}

  static constexpr Substream at(std::uint64_t base,
                                std::initializer_list<std::uint64_t> path) {
    return Substream(derive_key(base, path));
  }

  constexpr std::uint64_t next_u64() {
    state_ += kGolden;
    return mix64(state_);
  }

  // Uniform on [0, 1) with 53-bit resolution.
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  int next_bit() { return static_cast<int>(next_u64() >> 63); }

  // Circularly symmetric complex Gaussian with E|z|^2 = variance.
  std::complex<double> next_cnormal(double variance) {
    constexpr double two_pi = 6.283185307179586476925286766559;
    // u1 in (0, 1] so the log never sees zero.
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = next_uniform();
    const double r = std::sqrt(-variance * std::log(u1));
    return {r * std::cos(two_pi * u2), r * std::sin(two_pi * u2)};
  }

 private:
  std::uint64_t state_;
};

}  // namespace cpscm::rng
