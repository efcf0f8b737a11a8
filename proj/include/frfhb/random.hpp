#pragma once

#include <cstdint>
#include <random>

namespace frfhb {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser; used to derive independent, order-free seeds.
inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Generator for substream `stream` of a run seeded with `seed`. The result
/// depends only on (seed, stream), never on how many other streams exist.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream)
{
    const std::uint64_t a = splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(seed)};
    return Rng(seq);
}

inline double standard_normal(Rng& rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    return n(rng);
}

inline double uniform01(Rng& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return u(rng);
}

} // namespace frfhb
