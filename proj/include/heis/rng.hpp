#ifndef HEIS_RNG_HPP
#define HEIS_RNG_HPP

#include <cstdint>

#include "heis/vec.hpp"

namespace heis {

// SplitMix64. Small, seedable, and bit-identical everywhere; quality is more
// than enough for the sampling done here. Streams derived from (seed, stream)
// are independent enough for chunked Monte Carlo.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : state_(seed) {
    // Full-avalanche stream separation: feeding the mixed output back as the
    // state places each (seed, stream) at an effectively random counter
    // position, so chunk streams cannot overlap. A plain additive or xor
    // offset leaves nearby streams at nearly aligned counter positions.
    state_ += 0x9E3779B97F4A7C15ULL * (stream + 1);
    state_ = next();
    state_ = next();
  }

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform direction on S^3 (rejection from the cube)
  Vec4 sphere_dir() {
    while (true) {
      Vec4 v{uniform(-1, 1), uniform(-1, 1), uniform(-1, 1), uniform(-1, 1)};
      double n2 = norm2(v);
      if (n2 > 1e-12 && n2 <= 1.0) return (1.0 / std::sqrt(n2)) * v;
    }
  }

 private:
  std::uint64_t state_;
};

inline constexpr std::uint64_t kDefaultSeed = 0x5EEDCAFEULL;

}  // namespace heis

#endif
