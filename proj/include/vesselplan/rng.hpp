#pragma once

#include <cmath>
#include <cstdint>

namespace vplan {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic stream seed for item `index` of a suite seeded with `base`.
inline uint64_t derive_seed(uint64_t base, uint64_t index) {
  return splitmix64(base ^ splitmix64(index + 0x51ed2701ULL));
}

// xoshiro-free splitmix64 counter generator. Identical output on every
// platform, unlike std:: distributions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), counter_(0) {}

  uint64_t next_u64() { return splitmix64(seed_ + 0x632be59bd9b4e019ULL * ++counter_); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive on both ends.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller, no state carried between calls.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  uint64_t seed_;
  uint64_t counter_;
};

}  // namespace vplan
