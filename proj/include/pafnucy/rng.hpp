#pragma once

#include <cstdint>
#include <random>

namespace pafnucy {

// Deterministic random stream. mt19937_64 is fully specified by the
// standard, and all derived draws below are implemented in terms of its
// raw output, so the same seed produces the same sequence on every
// platform. std::normal_distribution and std::shuffle are avoided on
// purpose: their draw patterns are implementation-defined.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n), unbiased via rejection.
  uint64_t uniform_below(uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller (two uniforms per draw, no caching).
  double normal();

  template <class RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    const auto n = static_cast<uint64_t>(last - first);
    for (uint64_t i = n; i > 1; --i) {
      const uint64_t j = uniform_below(i);
      using std::swap;
      swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pafnucy
