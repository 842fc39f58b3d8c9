#pragma once

#include "marl/common.hpp"

#include <cstdint>

namespace marl {

namespace detail {
inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Mixes two seeds into one; used to key derived streams and episodes.
inline uint64_t mix_seed(uint64_t key, uint64_t stream) {
  uint64_t s = key;
  uint64_t a = detail::splitmix64(s);
  s = stream ^ 0xD1B54A32D192ED03ULL;
  uint64_t b = detail::splitmix64(s);
  s = a ^ (b << 1 | b >> 63);
  return detail::splitmix64(s);
}

/// Small counter-based generator (splitmix64). Bit-stable across platforms,
/// unlike std::uniform_real_distribution.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}
  Rng(uint64_t key, uint64_t stream) : state_(mix_seed(key, stream)) {}

  uint64_t next_u64() { return detail::splitmix64(state_); }

  /// Uniform in [0, 1).
  Scalar uniform() {
    return static_cast<Scalar>(next_u64() >> 11) * 0x1.0p-53;
  }

  Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

  /// Independent substream; does not advance this generator.
  Rng derive(uint64_t stream) const { return Rng(state_, stream); }

 private:
  uint64_t state_;
};

}  // namespace marl
