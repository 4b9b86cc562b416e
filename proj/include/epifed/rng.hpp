#pragma once

#include <cstdint>
#include <random>

namespace epifed {

/// SplitMix64 finalizer, used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Child seed for stream `stream` of a parent seed. Child streams of the same
/// parent never depend on how many siblings exist.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream);

/// 64-bit Mersenne Twister plus the handful of variates the simulators need.
/// Variates are computed from raw engine output so results do not depend on the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1].
  double uniform_open0() { return 1.0 - uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  double exponential(double rate);

  /// Weibull with scale lambda and shape k.
  double weibull(double scale, double shape);

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace epifed
