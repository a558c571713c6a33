#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dtrx {

using Rng = std::mt19937_64;

/// splitmix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed derivation used everywhere a sub-stream is needed:
/// s <- splitmix64(s ^ splitmix64(word)) folded over the words in order.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> words) noexcept
{
    std::uint64_t s = splitmix64(master);
    for (auto w : words)
        s = splitmix64(s ^ splitmix64(w + 0x632BE59BD9B4E019ULL));
    return s;
}

} // namespace dtrx
