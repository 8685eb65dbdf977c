#pragma once

#include <array>
#include <cstdint>

#include "wproj/types.hpp"

namespace wproj {

/// xoshiro256** seeded through splitmix64. The sequence for a given seed is
/// fixed across platforms; standard-library distributions are avoided
/// because their output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via the Box-Muller transform (pairs are cached).
  double normal();
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  /// Independent stream derived from this seed and a stream id.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id);

 private:
  std::array<std::uint64_t, 4> s_{};
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

/// n x d matrix of iid standard normals, filled row by row.
Matrix standard_normal(Rng& rng, Index n, Index d);

}  // namespace wproj
