#pragma once

#include <cstdint>
#include <random>

namespace reluspec {

/// Key of an independent random stream. Equal keys give identical draws.
struct RngSeed {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  RngSeed with_stream(std::uint64_t s) const { return {seed, s}; }
};

using Engine = std::mt19937_64;

/// Builds the engine for a (seed, stream) pair. Streams are derived through
/// seed_seq so neighbouring streams are decorrelated.
inline Engine make_engine(RngSeed key) {
  std::seed_seq seq{static_cast<std::uint32_t>(key.seed),
                    static_cast<std::uint32_t>(key.seed >> 32),
                    static_cast<std::uint32_t>(key.stream),
                    static_cast<std::uint32_t>(key.stream >> 32),
                    0x5eedu};
  return Engine(seq);
}

}  // namespace reluspec
