#pragma once

#include <cmath>
#include <cstdint>

namespace atomshadow {

namespace detail {
inline uint64_t splitmix_fin(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}
} // namespace detail

/// Counter-based random stream keyed by (seed, index). Every pixel gets its
/// own stream, so frames generated in parallel over rows are bit-identical
/// to sequential generation. The generator is splitmix64 on a Weyl counter,
/// with Box-Muller normals and Knuth/PTRS Poisson sampling on top.
class CounterRng {
public:
    CounterRng(uint64_t seed, uint64_t index)
        : state_(detail::splitmix_fin(seed + 0x9E3779B97F4A7C15ull * (index + 1)) ^
                 detail::splitmix_fin(index + 0x632BE59BD9B4E019ull)) {}

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return detail::splitmix_fin(state_);
    }

    /// Uniform in [0,1), 53-bit resolution.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in (0,1]; safe to feed to log().
    double next_unit_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double next_normal(double mu, double sigma) {
        const double u1 = next_unit_pos();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mu + sigma * r * std::cos(6.283185307179586476925287 * u2);
    }

    /// Exact Poisson draw. Knuth multiplication below lambda = 10, the
    /// PTRS transformed-rejection sampler (Hoermann 1993) above it.
    uint64_t next_poisson(double lambda) {
        if (!(lambda > 0.0)) return 0;
        if (lambda < 10.0) return poisson_knuth(lambda);
        return poisson_ptrs(lambda);
    }

private:
    uint64_t poisson_knuth(double lambda) {
        const double limit = std::exp(-lambda);
        uint64_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= next_unit_pos();
        } while (p > limit);
        return k - 1;
    }

    uint64_t poisson_ptrs(double lambda) {
        const double slam = std::sqrt(lambda);
        const double loglam = std::log(lambda);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            const double u = next_unit() - 0.5;
            const double v = next_unit_pos();
            const double us = 0.5 - std::fabs(u);
            const double kf = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
            if (us >= 0.07 && v <= vr) return static_cast<uint64_t>(kf);
            if (kf < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
                kf * loglam - lambda - std::lgamma(kf + 1.0)) {
                return static_cast<uint64_t>(kf);
            }
        }
    }

    uint64_t state_;
};

} // namespace atomshadow
