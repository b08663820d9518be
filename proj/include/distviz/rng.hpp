#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace distviz {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent stream seed for (seed, tag...). Streams depend only on the
/// tags, never on thread scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) noexcept {
    std::uint64_t s = mix64(seed);
    for (auto t : tags)
        s = mix64(s ^ mix64(t + 0x632be59bd9b4e019ULL));
    return s;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    return Rng{derive_seed(seed, tags)};
}

} // namespace distviz
