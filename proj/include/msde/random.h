//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MSDE_RANDOM_H_
#define MSDE_RANDOM_H_

#include <cstdint>
#include <random>
#include <string_view>

namespace msde {

using Rng = std::mt19937_64;

constexpr uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Child seed for an independent stream, e.g. (run seed, molecule index).
constexpr uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ (b * 0xD1B54A32D192ED03ULL));
}

constexpr uint64_t hash_name(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (char c: s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline double standard_normal(Rng &rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform_real(Rng &rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Unbiased integer in [0, n).
inline uint64_t uniform_index(Rng &rng, uint64_t n) {
  const uint64_t limit = Rng::max() - Rng::max() % n;
  uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

} // namespace msde

#endif // MSDE_RANDOM_H_
