#pragma once

#include <cstdint>

namespace bstop {

// Counter-based generator: output i is a bijective mix of (key, i), so any
// (seed, stream index) pair reproduces the same sequence regardless of how
// work is interleaved across threads. That is what keeps per-pixel parallel
// simulation byte-reproducible.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0)
        : key_(key), ctr_(counter) {}

    static CounterRng stream(std::uint64_t seed, std::uint64_t index) {
        return CounterRng(mix(seed ^ mix(index + 0x9E3779B97F4A7C15ull)));
    }

    std::uint64_t next_u64() { return mix(key_ + (++ctr_) * 0x9E3779B97F4A7C15ull); }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return next_double() < p; }

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

private:
    std::uint64_t key_;
    std::uint64_t ctr_;
};

}  // namespace bstop
