#pragma once

#include <cstdint>

namespace bcl {

// SplitMix64 (Steele/Lea/Flood constants). Seeds are portable across
// implementations: the environment tests re-derive the same streams by hand.
struct SplitMix64 {
    uint64_t state = 0;

    explicit SplitMix64(uint64_t seed = 0) : state(seed) {}

    uint64_t next() {
        state += 0x9E3779B97F4A7C15ULL;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1), 53-bit resolution.
    double next_double() { return double(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform in {0,...,n-1}; modulo bias is irrelevant for the tiny n used here.
    uint64_t next_below(uint64_t n) { return next() % n; }
};

// Deterministic derivation of independent seed streams from a base seed.
inline uint64_t mix_seed(uint64_t base, uint64_t salt) {
    SplitMix64 g(base ^ (salt * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL));
    return g.next();
}

inline uint64_t mix_seed(uint64_t base, uint64_t a, uint64_t b) {
    return mix_seed(mix_seed(base, a), b);
}

}  // namespace bcl
