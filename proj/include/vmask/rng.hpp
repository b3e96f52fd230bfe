#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace vmask {

// Seeded random stream with fixed sampling algorithms, so that results are
// reproducible across platforms (std::mt19937_64 is pinned by the standard,
// the <random> distributions are not).
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1).
  double uniform01() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    const uint64_t bound = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return static_cast<int>(x % bound);
  }

  // Standard normal via Box-Muller; one spare value cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Gumbel(0, 1) sample: -log(-log u).
  double gumbel() { return -std::log(-std::log(uniform01())); }

  bool bernoulli(double p) { return uniform01() < p; }

  // Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[i], v[uniform_int(i + 1)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace vmask
