#pragma once

#include <cstdint>
#include <random>

namespace sumkit {

/// splitmix64 mixing step.  Used to derive independent child seeds from a
/// single user-facing seed so that per-item streams do not overlap and do
/// not depend on processing order.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Child seed for stream `stream` under the base seed.  Stable: depends only
/// on the two arguments.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

using rng_t = std::mt19937_64;

/// Uniform integer in [lo, hi] inclusive.
inline int uniform_int(rng_t& rng, int lo, int hi) {
  std::uniform_int_distribution<int> d(lo, hi);
  return d(rng);
}

/// Uniform double in [0, 1).
inline double uniform01(rng_t& rng) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  return d(rng);
}

}  // namespace sumkit
