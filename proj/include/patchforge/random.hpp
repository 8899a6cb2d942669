#ifndef PATCHFORGE_RANDOM_HPP
#define PATCHFORGE_RANDOM_HPP

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace patchforge {

/// The engine is fully specified by the standard; the draws below avoid the
/// library-defined distributions so seeded runs agree across toolchains.
using Rng = std::mt19937_64;

/// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Rng &rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform_real(Rng &rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Uniform integer in [0, n), rejection-sampled to remove modulo bias.
inline std::size_t uniform_index(Rng &rng, std::size_t n) {
    const std::uint64_t bound = n;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return static_cast<std::size_t>(v % bound);
}

/// k distinct indices from [0, n) in draw order.
inline std::vector<std::size_t> sample_distinct(Rng &rng, std::size_t n, std::size_t k) {
    std::vector<std::size_t> out;
    out.reserve(k);
    while (out.size() < k) {
        const std::size_t c = uniform_index(rng, n);
        bool seen = false;
        for (auto v : out) seen = seen || v == c;
        if (!seen) out.push_back(c);
    }
    return out;
}

} // namespace patchforge

#endif
