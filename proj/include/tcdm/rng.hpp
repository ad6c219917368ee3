#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

// Seedable random streams. Every simulation index gets its own generator
// derived from (seed, stream) through SplitMix64, so results do not depend
// on how work is scheduled across threads.

namespace tcdm {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream)
      : engine_(splitmix64(seed ^ splitmix64(stream))) {}

  std::uint64_t nextU64() { return engine_(); }

  // Uniform double in [0, 1), 53-bit resolution; identical across platforms.
  double nextDouble() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound) via rejection sampling (unbiased).
  std::uint64_t nextBounded(std::uint64_t bound) {
    std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      std::uint64_t r = engine_();
      if (r >= threshold) return r % bound;
    }
  }

  int nextInt(int lo, int hi) {  // inclusive range
    return lo + static_cast<int>(nextBounded(
                    static_cast<std::uint64_t>(hi - lo + 1)));
  }

  bool nextBernoulli(double p) { return nextDouble() < p; }

  // Standard normal via Box-Muller on our portable uniforms.
  double nextGaussian() {
    double u1 = 0;
    while (u1 == 0) u1 = nextDouble();
    double u2 = nextDouble();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[nextBounded(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tcdm
