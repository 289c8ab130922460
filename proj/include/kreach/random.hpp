// Seeded random streams. Every worker derives its own generator from a master
// seed and a stream index so results never depend on scheduling.

#pragma once

#include <cstdint>
#include <random>

namespace kreach {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix_seed(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
    return mix_seed(mix_seed(master) ^ mix_seed(stream + 0x632BE59BD9B4E019ULL));
}

inline Rng derive_stream(std::uint64_t master, std::uint64_t stream) {
    return Rng{derive_seed(master, stream)};
}

// Stream tags used across modules.
namespace stream {
inline constexpr std::uint64_t kSampling = 1;
inline constexpr std::uint64_t kRffBasis = 2;
inline constexpr std::uint64_t kMonteCarlo = 3;
inline constexpr std::uint64_t kSubsetCheck = 4;
}  // namespace stream

}  // namespace kreach
