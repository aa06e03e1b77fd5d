#pragma once

#include <cstdint>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace spt {

// Counter-based generator (SplitMix64 output function over a Weyl sequence).
// Streams derived with derive_seed() are statistically independent, so a run
// can hand one seed to each measure / replicate / restart and stay
// reproducible no matter how the work is scheduled.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix(state_);
  }

  // Uniform on [0, 1), 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller on (0,1] x [0,1); the sine partner is
  // cached so consecutive draws consume one uniform pair per two normals.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - next_double();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Unbiased draw from {0, ..., n-1} by rejection.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("rng: next_below(0)");
    const std::uint64_t limit = ~0ull - ~0ull % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Seed for sub-stream `stream` of `seed`. Children of distinct (seed, stream)
// pairs do not collide in practice; derivation is pure so parallel replicates
// get identical draws regardless of scheduling.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return Rng::mix(seed ^ (0x9E3779B97F4A7C15ull * (stream + 0x632BE59BD9B4E019ull)));
}

}  // namespace spt
