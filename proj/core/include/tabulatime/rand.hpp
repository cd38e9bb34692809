#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace tabulatime {

// Portable draws on top of mt19937_64. The std distributions are
// implementation-defined, so anything that must reproduce bit-for-bit from a
// seed goes through these instead.

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_double(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_double(rng);
}

// Standard normal via Box-Muller (one value per call; the partner is dropped
// to keep the draw count independent of call parity).
double normal_double(std::mt19937_64& rng);

// splitmix64 step; the workhorse for seed derivation.
std::uint64_t mix_seed(std::uint64_t state);

// Stable named sub-seed: hash the base seed with a short tag and indices so
// independent consumers (init, shuffling, importance repeats, ...) never share
// a stream.
std::uint64_t derive_seed(std::uint64_t base, const char* tag,
                          std::uint64_t index = 0, std::uint64_t index2 = 0);

// Fisher-Yates permutation of 0..n-1 using uniform_double draws.
std::vector<std::int64_t> random_permutation(std::int64_t n,
                                             std::mt19937_64& rng);

}  // namespace tabulatime
