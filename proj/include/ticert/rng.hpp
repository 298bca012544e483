#pragma once

#include <cmath>
#include <cstdint>

namespace ticert {

// Counter-based generator: draw k of stream `key` is splitmix64(key + k*gamma),
// a bijective hash of the counter. Streams are reproducible from (key, k)
// alone, so replicas can be generated in any order on any worker.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(mix(key)) {}
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(mix(seed ^ stream)) {}

  std::uint64_t next() {
    ++counter_;
    return mix(key_ + counter_ * kGamma);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  // Uniform on (0, 1].
  double uniform_open_left() { return 1.0 - uniform(); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double exponential(double rate) { return -std::log(uniform_open_left()) / rate; }
  // Standard normal by Box-Muller (one draw per call).
  double normal() {
    const double u1 = uniform_open_left();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  std::uint64_t counter() const noexcept { return counter_; }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace ticert
