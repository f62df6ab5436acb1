#pragma once

#include <cstdint>
#include <random>

namespace cigauge {

using Rng = std::mt19937_64;

// splitmix64 finalizer; decorrelates neighbouring (seed, index) pairs.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Independent generator for work item `index` under a master seed. Trial i
// always sees the same stream no matter which worker runs it.
inline Rng substream(std::uint64_t master_seed, std::uint64_t index) {
  return Rng(mix_seed(mix_seed(master_seed) ^ mix_seed(index + 1)));
}

}  // namespace cigauge
