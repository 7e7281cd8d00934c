#pragma once

#include <cmath>
#include <cstdint>

namespace pmsim {

// Small deterministic generator (splitmix64). Used instead of <random>
// distributions so that drawn values are identical across platforms and
// standard-library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  /// Derive an independent stream, e.g. one per grid point.
  static std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    Rng r(base ^ (0x632be59bd9b4e019ull + index * 0x9e3779b97f4a7c15ull));
    return r.next_u64();
  }

 private:
  std::uint64_t state_;
};

}  // namespace pmsim
