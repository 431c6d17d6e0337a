#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace bsa {

// Every random choice in the library flows from a user-supplied 64-bit seed
// through derive_seed, so reruns with the same config are bit-identical and
// independent subsystems (net init, dropout, holdout split, data generation)
// never share a stream.

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = splitmix64(base);
    for (std::uint64_t p : path) {
        s = splitmix64(s ^ splitmix64(p));
    }
    return s;
}

// Stream tags used as derive_seed path elements.
namespace seed_tag {
constexpr std::uint64_t net_init = 0x01;
constexpr std::uint64_t train = 0x02;
constexpr std::uint64_t split = 0x03;
constexpr std::uint64_t data = 0x04;
constexpr std::uint64_t cell = 0x05;
constexpr std::uint64_t parallel = 0x06;
constexpr std::uint64_t repeat = 0x07;
constexpr std::uint64_t noise = 0x08;
}  // namespace seed_tag

inline std::mt19937_64 make_rng(std::uint64_t seed) {
    return std::mt19937_64(seed);
}

}  // namespace bsa
