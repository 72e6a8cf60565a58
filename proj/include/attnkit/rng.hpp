#pragma once

#include <cstdint>

namespace attnkit {

// Counter-based generator: the k-th draw is a pure function of (seed, k), so
// streams are reproducible and can be split per tensor without shared state.
// Normal variates come from Box-Muller on the uniform stream.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed) {}

  // Derived generator for an independent stream.
  Rng child(uint64_t stream) const { return Rng(mix(seed_ ^ mix(stream + 0x632be59bd9b4e019ULL))); }

  uint64_t next_u64() {
    counter_ += 0x9e3779b97f4a7c15ULL;
    return mix(seed_ + counter_);
  }

  // Uniform in the open interval (0, 1).
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0); }

  double normal();

  // Uniform integer in [0, n). Modulo bias is irrelevant at the n used here.
  uint64_t below(uint64_t n) { return next_u64() % n; }

  uint64_t seed() const { return seed_; }

 private:
  static uint64_t mix(uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
  }

  uint64_t seed_;
  uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace attnkit
