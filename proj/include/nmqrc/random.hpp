#pragma once

#include <cstdint>
#include <random>

namespace nmqrc {

/// Seedable generator used for every stochastic draw in the library.
///
/// Algorithm: 64-bit Mersenne Twister (std::mt19937_64, fully specified by
/// the C++ standard). Uniform doubles take the top 53 bits of one draw, so a
/// seed maps to the same stream on every conforming platform. The <random>
/// distribution adaptors are not used: their algorithms are
/// implementation-defined.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform in (-half_width, half_width); exactly 0 when half_width is 0.
  double symmetric(double half_width) { return half_width * (2.0 * uniform01() - 1.0) + 0.0; }

  std::uint64_t next_u64() { return engine_(); }

private:
  std::mt19937_64 engine_;
};

/// Derives an independent stream seed from a base seed and a stream tag
/// (splitmix64 finalizer over the combined value).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Stream tags so that couplings and input sequences never share draws.
inline constexpr std::uint64_t kCouplingStream = 0;
inline constexpr std::uint64_t kInputStream = 1;

}  // namespace nmqrc
