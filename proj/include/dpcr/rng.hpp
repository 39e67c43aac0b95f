#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "dpcr/common.hpp"

namespace dpcr {

// Deterministic noise generator (splitmix64 core, inverse-CDF sampling).
// Each laplace/gaussian call counts as one draw so tests can assert exactly
// how many samples a mechanism consumed.  In suppress mode every sample is 0
// (noiseless oracle mode) but state still advances and draws are still
// counted, keeping the consumption pattern identical to a noisy run.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed, bool suppress = false)
      : state_(seed), suppress_(suppress) {}

  // Uniform in (0, 1), never exactly 0 or 1.
  double uniform() { return (next() >> 11) * 0x1.0p-53 + 0x1.0p-54; }

  double laplace(double scale) {
    if (!(scale > 0)) throw std::domain_error("laplace scale must be positive");
    ++draws_;
    const double u = uniform();
    const double x = u < 0.5 ? scale * std::log(2.0 * u)
                             : -scale * std::log(2.0 * (1.0 - u));
    return suppress_ ? 0.0 : x;
  }

  double gaussian(double sigma) {
    if (!(sigma > 0)) throw std::domain_error("gaussian sigma must be positive");
    ++draws_;
    const double u1 = uniform();
    const double u2 = uniform();
    const double x =
        sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    return suppress_ ? 0.0 : x;
  }

  // Derives an independent child stream.
  NoiseSource fork() {
    return NoiseSource(next() ^ 0x9e3779b97f4a7c15ULL, suppress_);
  }

  bool suppressed() const { return suppress_; }
  std::uint64_t draw_count() const { return draws_; }

 private:
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  bool suppress_;
  std::uint64_t draws_ = 0;
};

// Per-trial seed derivation used by the harness.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace dpcr
