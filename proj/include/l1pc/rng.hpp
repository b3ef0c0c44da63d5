#pragma once

#include <cstdint>

namespace l1pc {

// splitmix64: tiny deterministic generator used for toy-model weights and
// seeded test prompts. Identical seed -> identical stream on every platform.
struct SplitMix64 {
    uint64_t state = 0;

    explicit SplitMix64(uint64_t seed) : state(seed) {}

    uint64_t next() {
        uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1), 53 random bits
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi)
    float next_uniform(float lo, float hi) {
        return static_cast<float>(lo + (hi - lo) * next_double());
    }

    uint64_t next_below(uint64_t n) { return next() % n; }
};

}  // namespace l1pc
