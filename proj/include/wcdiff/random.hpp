#pragma once

#include <cstdint>
#include <random>

namespace wcdiff {

using Rng = std::mt19937_64;

/// Independent generator for one (seed, run, stream) triple. Streams are
/// typically agent ids; the same triple always yields the same sequence.
inline Rng make_stream(std::uint64_t seed, std::uint64_t run, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(run), static_cast<std::uint32_t>(run >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32), 0x5eedu};
  return Rng(seq);
}

}  // namespace wcdiff
