#pragma once

#include <cstdint>
#include <random>

namespace pode::detail {

/// Independent, reproducible stream derived from (seed, stream, substream).
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      static_cast<std::uint32_t>(substream), 0x9e3779b9u};
    return std::mt19937_64(seq);
}

// Stream tags keep the different consumers of one seed apart.
inline constexpr std::uint64_t kProbitStream = 1;
inline constexpr std::uint64_t kDayStream = 2;
inline constexpr std::uint64_t kDemandStream = 3;

} // namespace pode::detail
