#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mrsi {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive per-sample / per-voxel seeds.
constexpr std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) noexcept
{
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline double uniform(Rng& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double log_uniform(Rng& rng, double lo, double hi)
{
    return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

inline double normal(Rng& rng, double mean, double sd)
{
    return std::normal_distribution<double>(mean, sd)(rng);
}

} // namespace mrsi
