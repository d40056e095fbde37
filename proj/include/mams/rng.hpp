#pragma once
// Counter-based RNG: every (seed, stream) pair yields an independent,
// reproducible sequence, so Monte Carlo replicates can be assigned one
// stream each and results do not depend on execution order or worker count.
#include <cstdint>
#include "mams/normal.hpp"

namespace mams {

inline uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  Rng(uint64_t seed, uint64_t stream)
      : state_(mix64(seed + 0x9e3779b97f4a7c15ULL * (stream + 1)) ^
               mix64(stream + 0x632be59bd9b4e019ULL)) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  // uniform on (0,1), never exactly 0 or 1
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54; }

  double normal() { return norm_quantile(uniform()); }

 private:
  uint64_t state_;
};

}  // namespace mams
