#pragma once

#include <cstdint>

namespace posecanon {

/// splitmix64 finaliser (Steele, Lea, Flood). Used to derive independent
/// per-item seeds from a corpus seed and an index.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// seed for item `index` of a stream identified by `seed` and `salt`.
constexpr std::uint64_t deriveSeed(std::uint64_t seed, std::uint64_t index, std::uint64_t salt = 0) {
  return splitmix64(seed ^ splitmix64(index ^ (salt * 0xd1b54a32d192ed03ULL)));
}

} // namespace posecanon
