#pragma once

#include <cstdint>

// Portable, fully specified PRNG stack: splitmix64 for seeding and stream
// derivation, xoshiro256** for the generator itself. Reference constants
// from the published algorithms; no libc rand, no std::mt19937, so streams
// are bit-identical across platforms and standard libraries.

namespace attnet {

inline uint64_t splitmix64_next(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64_next(sm);
  }

  uint64_t next() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0,1): top 53 bits scaled by 2^-53.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0,n) by modulo rejection.
  uint64_t below(uint64_t n) {
    uint64_t x, r;
    do {
      x = next();
      r = x % n;
    } while (x - r > ~uint64_t{0} - n + 1);
    return r;
  }

  // Approximate standard normal as sum of 12 uniforms minus 6 (Irwin-Hall).
  // Chosen over Box-Muller so no transcendental libm calls enter the stream.
  double gauss() {
    double s = 0.0;
    for (int i = 0; i < 12; ++i) s += uniform();
    return s - 6.0;
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
};

// Independent substream: offsets the seed by stream_id golden-ratio gammas
// before the splitmix64 expansion inside Rng. Substream 0 != the base stream.
inline Rng substream(uint64_t seed, uint64_t stream_id) {
  return Rng(seed + (stream_id + 1) * 0x9e3779b97f4a7c15ULL);
}

}  // namespace attnet
