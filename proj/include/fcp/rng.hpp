#pragma once

#include <cstdint>
#include <random>
#include <span>

#include <boost/random/uniform_int_distribution.hpp>

namespace fcp {

/// std::mt19937_64 has a standardized output sequence; the distributions
/// come from Boost.Random, whose algorithms are fixed across platforms
/// (the std:: distributions are implementation-defined).
using Engine = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed of replicate `index` under master seed `seed`. Depends on nothing
/// else, so replicates can be generated in any order or in parallel.
constexpr std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index) noexcept
{
    return mix64(mix64(seed) ^ mix64(index + 0xD1B54A32D192ED03ULL));
}

inline Engine make_engine(std::uint64_t seed) { return Engine(mix64(seed)); }

/// Fisher-Yates shuffle with a portable index distribution.
template <typename T>
void shuffle(std::span<T> items, Engine& eng)
{
    for (std::size_t i = items.size(); i > 1; --i) {
        boost::random::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(items[i - 1], items[pick(eng)]);
    }
}

} // namespace fcp
