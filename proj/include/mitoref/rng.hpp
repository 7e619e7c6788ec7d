#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace mitoref {

// Draws below consume only raw mt19937 output, which the standard pins down
// exactly; std::uniform_*_distribution and std::shuffle are not reproducible
// across standard library implementations.

/// Uniform integer in [0, bound) via rejection sampling. bound must be > 0.
inline std::uint32_t uniform_u32(std::mt19937& gen, std::uint32_t bound) {
    const std::uint32_t threshold = (0u - bound) % bound;  // 2^32 mod bound
    for (;;) {
        std::uint32_t x = gen();
        if (x >= threshold) return x % bound;
    }
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(std::mt19937& gen) {
    const std::uint32_t hi = gen() >> 5;  // 27 bits
    const std::uint32_t lo = gen() >> 6;  // 26 bits
    return (hi * 67108864.0 + lo) * (1.0 / 9007199254740992.0);
}

/// Uniform double in [lo, hi).
inline double uniform_range(std::mt19937& gen, double lo, double hi) {
    return lo + (hi - lo) * uniform01(gen);
}

/// Fisher-Yates shuffle driven by uniform_u32.
template <typename T>
void shuffle_portable(std::vector<T>& v, std::mt19937& gen) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = uniform_u32(gen, static_cast<std::uint32_t>(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace mitoref
