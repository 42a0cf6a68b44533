#pragma once

#include <cmath>
#include <cstdint>

namespace lsd2 {

// Deterministic counter-based generator (SplitMix64). The whole pipeline
// depends on draw sequences being reproducible for a given seed, so no
// std::random facilities are used anywhere: the integer stream is exact on
// every platform. split(index) derives an independent child stream from
// (seed, index), which is what batch generation uses to give every sample
// its own stream regardless of worker count.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(mix(seed ^ 0x9e3779b97f4a7c15ull)) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix(state_);
    }

    // Independent child stream keyed by (current state, index).
    Rng split(uint64_t index) const {
        Rng child(0);
        child.state_ = mix(mix(state_ ^ 0xbf58476d1ce4e5b9ull) + index * 0x94d049bb133111ebull);
        return child;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

    // Poisson draw. Sequential inversion for small means, Hormann's PTRD
    // transformed rejection for lambda >= 10. Returns a double because the
    // shot-noise path divides by lambda anyway and counts can exceed 2^32
    // in the lambda -> infinity tests.
    double poisson(double lambda) {
        if (lambda <= 0.0) return 0.0;
        if (lambda < 10.0) return poisson_inversion(lambda);
        return poisson_ptrd(lambda);
    }

private:
    uint64_t state_;

    static uint64_t mix(uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ull;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebull;
        z ^= z >> 31;
        return z;
    }

    double poisson_inversion(double lambda) {
        const double l = std::exp(-lambda);
        double p = 1.0;
        double k = 0.0;
        do {
            k += 1.0;
            p *= uniform();
        } while (p > l);
        return k - 1.0;
    }

    // W. Hormann, "The transformed rejection method for generating Poisson
    // random variables" (PTRD). Valid for lambda >= 10.
    double poisson_ptrd(double lambda) {
        const double smu = std::sqrt(lambda);
        const double b = 0.931 + 2.53 * smu;
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        const double log_lambda = std::log(lambda);

        for (;;) {
            double u = uniform() - 0.5;
            double v = uniform();
            double us = 0.5 - std::abs(u);
            double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
            if (us >= 0.07 && v <= v_r) return k;
            if (k < 0.0 || (us < 0.013 && v > us)) continue;
            double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
            double rhs = k * log_lambda - lambda - std::lgamma(k + 1.0);
            if (lhs <= rhs) return k;
        }
    }
};

} // namespace lsd2
