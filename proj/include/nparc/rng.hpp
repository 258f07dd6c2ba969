#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace nparc {

using Rng = std::mt19937_64;

namespace detail {
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}
}  // namespace detail

/// Derives an independent seed for a named substream ("data", "design",
/// "sgda", "eval", ...) and optional integer indices.
constexpr std::uint64_t substream_seed(std::uint64_t master, std::string_view name,
                                       std::uint64_t i = 0, std::uint64_t j = 0) {
    std::uint64_t s = detail::splitmix64(master ^ detail::fnv1a(name));
    s = detail::splitmix64(s ^ (i * 0xd1b54a32d192ed03ULL));
    s = detail::splitmix64(s ^ (j * 0x8cb92ba72f3d8dd7ULL));
    return s;
}

inline Rng make_rng(std::uint64_t master, std::string_view name, std::uint64_t i = 0,
                    std::uint64_t j = 0) {
    return Rng(substream_seed(master, name, i, j));
}

}  // namespace nparc
