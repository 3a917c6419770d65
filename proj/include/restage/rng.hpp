#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace restage {

// Deterministic helpers on top of the (standard-specified) mt19937_64
// engine; distributions are hand-rolled because libstdc++'s are not
// portable across implementations.
struct Rng {
    std::mt19937_64 engine;

    explicit Rng(uint64_t seed) : engine(seed) {}

    // Derives an independent stream for a named purpose.
    static Rng stream(uint64_t seed, uint64_t purpose) {
        return Rng(seed * 0x9E3779B97F4A7C15ull + purpose * 0xBF58476D1CE4E5B9ull + 1ull);
    }

    double uniform() {  // in [0, 1)
        return (engine() >> 11) * 0x1.0p-53;
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Box-Muller.
    double normal(double mean = 0.0, double sigma = 1.0) {
        double u1 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sigma * r * std::cos(2.0 * M_PI * u2);
    }
    uint64_t integer(uint64_t bound) {  // in [0, bound)
        return engine() % bound;
    }
};

}  // namespace restage
