#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace crpsreg {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child seed keyed on an ordered list of counters. Independent of the order
// in which children are requested, so parallel schedules reproduce serial runs.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> keys) {
  std::uint64_t state = splitmix64(master);
  for (std::uint64_t k : keys) state = splitmix64(state ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return state;
}

// Uniform draw on the open interval (0, 1) with 53 random bits.
inline double uniform_open01(Rng& rng) {
  for (;;) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    if (u > 0.0) return u;
  }
}

}  // namespace crpsreg
