#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace memoir {

/// Seeded random stream with platform-independent sampling.
///
/// std::uniform_real_distribution and std::normal_distribution are
/// implementation-defined, so sampling is done by hand on top of the
/// fully-specified mt19937_64 engine. Every generator in the project takes
/// one of these by reference and never touches global state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller (second variate cached).
  double normal();
  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);
  std::uint64_t next_u64() { return engine_(); }

  /// Independent child stream; deterministic in (parent seed, stream id).
  Rng fork(std::uint64_t stream);

  /// splitmix64 finalizer, used to decorrelate nearby seeds.
  static std::uint64_t mix(std::uint64_t x);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace memoir
