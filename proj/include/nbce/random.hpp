#pragma once

#include <cstdint>
#include <random>

// Deterministic RNG helpers. std::uniform_int_distribution and friends are
// implementation-defined, so anything with a reproducibility contract
// (seeded sampling, random pooling, sampling decode) goes through these.

namespace nbce {

// splitmix64; used to derive independent sub-streams from (seed, index).
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::mt19937_64 make_rng(uint64_t seed, uint64_t stream = 0) {
    return std::mt19937_64(mix64(seed ^ mix64(stream)));
}

// Unbiased integer in [0, n) via rejection sampling.
inline uint64_t bounded_rand(std::mt19937_64 & rng, uint64_t n) {
    if (n <= 1) {
        return 0;
    }
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

// Uniform double in [0, 1) with 53 bits of mantissa.
inline double canonical_double(std::mt19937_64 & rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace nbce
