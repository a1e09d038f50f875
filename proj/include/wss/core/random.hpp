#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace wss {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return mix_seed(base ^ mix_seed(stream));
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return derive_seed(base, h);
}

/// Uniform integer in [lo, hi] from a raw 64-bit draw; independent of the standard library's
/// distribution implementation.
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(rng() % span);
}

/// Uniform real in [0, 1).
inline double uniform_real(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace wss
