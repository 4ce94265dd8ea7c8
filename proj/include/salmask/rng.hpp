#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace salmask {

// SplitMix64 generator. Hand-rolled so that streams are bit-identical across
// platforms and standard-library versions; std::normal_distribution is not.
struct Rng {
  uint64_t state = 0x9e3779b97f4a7c15ULL;

  Rng() = default;
  explicit Rng(uint64_t seed) : state(seed ^ 0x9e3779b97f4a7c15ULL) {}

  uint64_t next_u64() {
    state += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // [0, n)
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

  double normal() {
    double u1 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Derived stream; advances this generator.
  Rng fork(uint64_t tag = 0) {
    Rng child;
    child.state = next_u64() ^ (tag * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
    return child;
  }

  // Fisher-Yates permutation of 0..n-1.
  std::vector<int> permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    for (int i = n - 1; i > 0; --i) {
      const int j = uniform_int(i + 1);
      std::swap(p[i], p[j]);
    }
    return p;
  }
};

}  // namespace salmask
