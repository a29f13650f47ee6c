#pragma once

#include <cmath>
#include <cstdint>

namespace lomo {

// xoshiro256++ with splitmix64 seeding. Self-contained so that runs are
// reproducible bit-for-bit across toolchains; std::<distribution> output is
// implementation-defined and would break recorded expectations.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& si : s_) si = splitmix(x);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [lo, hi)
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo));
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // Box-Muller; u1 kept strictly positive.
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  template <typename T>
  void fill_normal(T* p, int64_t n, T mean = T(0), T stddev = T(1)) {
    for (int64_t i = 0; i < n; ++i)
      p[i] = mean + stddev * static_cast<T>(normal());
  }

  template <typename T>
  void fill_uniform(T* p, int64_t n, T lo, T hi) {
    for (int64_t i = 0; i < n; ++i) p[i] = static_cast<T>(uniform(lo, hi));
  }

  // Independent child stream; deterministic in (parent seed, tag).
  Rng fork(uint64_t tag) const {
    uint64_t x = s_[0] ^ (0x9e3779b97f4a7c15ULL * (tag + 1));
    return Rng(x);
  }

 private:
  static uint64_t splitmix(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t s_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lomo
