#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace cropmesh {

// Counter-based randomness: every draw is a pure function of its key words.
// Streams keyed on (seed, purpose, id, epoch) never alias across modules and
// replay exactly, which is what the determinism guarantees lean on.

inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t hash_key(uint64_t a, uint64_t b = 0, uint64_t c = 0,
                         uint64_t d = 0) {
  uint64_t h = mix64(a);
  h = mix64(h ^ 0x8f1bbcdcbfa53e0bULL ^ b);
  h = mix64(h ^ 0x2545f4914f6cdd1dULL ^ c);
  h = mix64(h ^ 0x9d2c5680dd51c0f5ULL ^ d);
  return h;
}

// Uniform double in [0, 1).
inline double uniform01(uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller on two derived uniforms. Avoids the
// implementation-defined std::normal_distribution so streams are portable.
inline double normal01(uint64_t key) {
  double u1 = uniform01(mix64(key ^ 0x5bf03635dcf2d69dULL));
  double u2 = uniform01(mix64(key ^ 0x16a66ec4d6c9ef1bULL));
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

// Sequential generator for shuffles and one-off draws.
class SplitMix {
 public:
  explicit SplitMix(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  double next01() { return uniform01(next()); }

  // Unbiased-enough integer in [0, n) via 128-bit multiply.
  uint64_t below(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next01(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

}  // namespace cropmesh
