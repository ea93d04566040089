#pragma once

#include <cstdint>
#include <random>

namespace ikd {

/// splitmix64 mixing step, used to decorrelate derived seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Independent generator for item `index` of the job seeded with `seed`.
/// Parallel loops draw from per-item streams so results do not depend on
/// scheduling order.
inline std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(mix64(mix64(seed) ^ mix64(index + 1)));
}

}  // namespace ikd
