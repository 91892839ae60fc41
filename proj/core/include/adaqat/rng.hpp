#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace adaqat {

// Deterministic random stream (splitmix64 core). Sampling is implemented
// here instead of through <random> distributions, whose output sequences are
// implementation-defined; bit-reproducible runs are part of the training
// contract.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  // Independent stream for a (seed, salt, salt) combination; used to key
  // shuffling, augmentation, and init off (seed, epoch, purpose) so resuming
  // from a checkpoint replays identical draws.
  static Rng stream(uint64_t seed, uint64_t salt_a, uint64_t salt_b = 0) {
    return Rng(mix(seed) ^ mix(salt_a ^ 0x9e3779b97f4a7c15ULL) ^
               mix(salt_b ^ 0x6a09e667f3bcc909ULL));
  }

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); n must be positive.
  int64_t below(int64_t n) {
    return static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller; the second draw of each pair is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u = 1.0 - uniform();  // (0, 1], keeps the log finite
    const double r = std::sqrt(-2.0 * std::log(u));
    const double theta = 2.0 * 3.14159265358979323846 * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double gaussian(double mean, double stddev) {
    return mean + stddev * gaussian();
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(below(i + 1))]);
    }
  }

 private:
  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace adaqat
