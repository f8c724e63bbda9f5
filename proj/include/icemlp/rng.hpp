#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>

namespace icemlp {

// Every randomized operation in the library takes an explicit 64-bit seed and
// draws from std::mt19937_64, whose output sequence is fixed by the standard.
// Floating-point draws below avoid std::uniform_real_distribution, which is
// implementation-defined, so streams are bit-stable across toolchains.

/// Stateless 64-bit finalizer (splitmix64).
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Child seed for a named substream of `base`. Distinct index tuples give
/// statistically independent streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = mix64(base + 0x9e3779b97f4a7c15ull);
    s = mix64(s ^ (a + 0x9e3779b97f4a7c15ull));
    s = mix64(s ^ (b + 0x6a09e667f3bcc909ull));
    s = mix64(s ^ (c + 0xbb67ae8584caa73bull));
    return s;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform_unit(rng);
}

/// Unbiased uniform integer in [0, n). n must be positive.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % n;
}

}  // namespace icemlp
