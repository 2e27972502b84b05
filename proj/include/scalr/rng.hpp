#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace scalr {

/// splitmix64 step; used both as a generator and to derive sub-stream seeds.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Mixes a seed with a sequence of stream identifiers. Every random decision
/// in the pipeline draws from a stream derived this way, so runs are
/// reproducible bit-for-bit from the single run seed.
inline uint64_t mix_seed(uint64_t seed, std::initializer_list<uint64_t> ids) {
  uint64_t s = seed;
  (void)splitmix64(s);
  for (uint64_t id : ids) {
    s ^= id + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
    (void)splitmix64(s);
  }
  return s;
}

/// Deterministic PRNG with hand-rolled distributions. The standard library's
/// distribution objects are implementation-defined, which would break the
/// byte-identical-artifacts contract across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // warm up; avoids the low-entropy first output for tiny seeds
    (void)splitmix64(state_);
  }

  uint64_t next_u64() { return splitmix64(state_); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be >= 1.
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

  /// Standard normal via Box-Muller. Always consumes two uniforms.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// In-place Fisher-Yates. std::shuffle is not portable across libstdc++
  /// versions, this is.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = next_u64() % i;
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

}  // namespace scalr
