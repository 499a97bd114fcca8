#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace svc {

// splitmix64 finalizer. Used to derive independent streams from
// (seed, step, index...) tuples so that every random draw in training is a
// pure function of its coordinates.
constexpr uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr uint64_t derive_seed(std::initializer_list<uint64_t> parts) {
  uint64_t h = 0x51ed270b27c3a5d1ULL;
  for (uint64_t p : parts) h = mix64(h ^ mix64(p));
  return h;
}

// FNV-1a, stable across platforms; used for content hashes and splits.
constexpr uint64_t fnv1a64(std::string_view bytes,
                           uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Small deterministic generator with portable bounded draws (the standard
// distributions are implementation-defined, which breaks bit-exact traces).
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next() { return mix64(state_++); }

  // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  uint64_t below(uint64_t n) {
    if (n <= 1) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t r;
    do {
      r = next();
    } while (r >= limit);
    return r % n;
  }

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; one value per call.
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  uint64_t state_;
};

}  // namespace svc
