#pragma once

#include <cstdint>
#include <random>

namespace critr {

using Rng = std::mt19937_64;

// Named streams mixed into derive_seed for reserved uses.
inline constexpr std::uint64_t kTestStream = 0x74657374ULL;      // "test"
inline constexpr std::uint64_t kUniformStream = 0x756e69666fULL;  // "unifo"

// Deterministic sub-seed for (seed, stream) via two rounds of splitmix64.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(seed) ^ (stream * 0xd1342543de82ef95ULL + 1));
}

}  // namespace critr
