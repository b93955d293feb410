#pragma once

#include <cstdint>
#include <random>

namespace nasaswin {

/// Seeded generator with platform-independent draws. The std distributions
/// are implementation-defined, so every draw used for reproducibility goes
/// through the helpers here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n), rejection-sampled (no modulo bias).
  std::uint64_t below(std::uint64_t n);
  double normal();
  /// Normal(0, sigma) truncated to [-2 sigma, 2 sigma].
  double truncated_normal(double sigma);

 private:
  std::mt19937_64 engine_;
};

/// Mixes several integers into one seed (splitmix64 finalizer chain).
std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace nasaswin
