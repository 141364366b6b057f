#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "zeronas/common.hpp"

namespace zeronas {

// Counter-based deterministic generator (splitmix64 core). The (seed, counter)
// pair fully determines every draw, independent of platform word order or
// library distributions, so identical seeds replay identical streams.
class RngState {
 public:
  explicit RngState(std::uint64_t seed = 0) : seed_(seed), counter_(0) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() {
    std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ull * (++counter_);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    // Desk-scale n; modulo bias is < n / 2^64 and irrelevant here.
    return next_u64() % n;
  }

  // Standard normal via the Marsaglia polar method (no trig calls).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  // Independent child stream for (tag, index); used to give each evaluation
  // job its own generator without sharing state.
  RngState derive(std::string_view tag, std::uint64_t index = 0) const {
    std::uint64_t h = fnv1a64(tag, seed_ ^ 0x51ed270b7a4fca11ull);
    h = fnv1a64(&index, sizeof(index), h);
    return RngState(h);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace zeronas
