#pragma once

#include <cmath>
#include <cstdint>

namespace medexc {

// Deterministic 64-bit PRNG (xoshiro256++) with splitmix64 seeding.
// All draws are derived from raw 64-bit outputs so that results are
// bit-identical across platforms. Streams are keyed by (seed, stream ids)
// so each (replicate, participant) pair gets an independent stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) { seed_state(seed); }
  Rng(std::uint64_t seed, std::uint64_t stream1, std::uint64_t stream2 = 0) {
    seed_state(mix(mix(seed ^ 0x9e3779b97f4a7c15ULL, stream1), stream2));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform on [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

  // standard normal, Box-Muller with cached spare
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Fisher-Yates shuffle of {0,...,n-1} style index draws
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  static std::uint64_t mix(std::uint64_t z, std::uint64_t salt) {
    z += 0x9e3779b97f4a7c15ULL + salt;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  void seed_state(std::uint64_t seed) {
    std::uint64_t z = seed;
    for (auto& s : s_) {
      z += 0x9e3779b97f4a7c15ULL;
      s = mix(z, 0);
    }
    for (int i = 0; i < 8; ++i) next_u64();
  }

  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace medexc
