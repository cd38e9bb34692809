#include "tabulatime/rand.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

namespace tabulatime {

double normal_double(std::mt19937_64& rng) {
  // Guard the log: u1 is in [0,1), shift away from 0.
  double u1 = uniform_double(rng);
  double u2 = uniform_double(rng);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t mix_seed(std::uint64_t state) {
  state += 0x9e3779b97f4a7c15ULL;
  state = (state ^ (state >> 30)) * 0xbf58476d1ce4e5b9ULL;
  state = (state ^ (state >> 27)) * 0x94d049bb133111ebULL;
  return state ^ (state >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, const char* tag,
                          std::uint64_t index, std::uint64_t index2) {
  std::uint64_t state = mix_seed(base);
  for (const char* p = tag; *p != '\0'; ++p) {
    state = mix_seed(state ^ static_cast<std::uint64_t>(
                                 static_cast<unsigned char>(*p)));
  }
  state = mix_seed(state ^ index);
  return mix_seed(state ^ index2);
}

std::vector<std::int64_t> random_permutation(std::int64_t n,
                                             std::mt19937_64& rng) {
  std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (std::int64_t i = n - 1; i > 0; --i) {
    auto j = static_cast<std::int64_t>(uniform_double(rng) *
                                       static_cast<double>(i + 1));
    if (j > i) j = i;  // guards the rare u == 1-ulp rounding
    std::swap(perm[static_cast<std::size_t>(i)],
              perm[static_cast<std::size_t>(j)]);
  }
  return perm;
}

}  // namespace tabulatime
