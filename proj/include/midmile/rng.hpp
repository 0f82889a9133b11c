#pragma once

#include <cstdint>
#include <random>

namespace midmile {

using Rng = std::mt19937_64;

// Independent stream for (seed, stream). Used to derive per-episode and
// per-stage generators so that changing one consumer never shifts another.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32), 0x6d6d6cu};
  return Rng(seq);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  Rng rng = make_rng(seed, stream);
  return rng();
}

}  // namespace midmile
