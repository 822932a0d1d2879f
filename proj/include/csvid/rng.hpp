#pragma once

#include <cmath>
#include <cstdint>

namespace csvid {

// Deterministic pseudo-random stream: SplitMix64 state advance with
// Box-Muller for normal variates. Identical seed gives a byte-identical
// stream, which is what makes a seeded sensing matrix act as key material.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
  }

  // Standard normal via Box-Muller; consumes exactly two uniform draws and
  // keeps only the cosine branch so the stream position stays predictable.
  double gaussian() {
    double u1 = 1.0 - uniform();  // (0,1], keeps the log finite
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::uint64_t state_;
  std::uint64_t seed_;
};

}  // namespace csvid
