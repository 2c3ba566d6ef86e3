#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace klpc {

// Seeded random stream with explicit normal/uniform generation, so that
// sequences are reproducible bit-for-bit from the seed alone (the C++
// standard leaves distribution algorithms implementation-defined, so we
// do not rely on std::*_distribution anywhere).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; one spare kept between calls.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Independent child stream; used to hand deterministic per-worker or
  // per-sample streams to parallel loops.
  static std::uint64_t derive(std::uint64_t master, std::uint64_t index) {
    // splitmix64 over master ^ golden-ratio-scrambled index
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace klpc
