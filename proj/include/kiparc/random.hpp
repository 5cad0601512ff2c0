#pragma once

// Deterministic RNG for seeded synthetic data. The standard distribution
// adapters are implementation-defined, so uniform and normal variates are
// derived from the raw mt19937_64 stream directly; a given seed produces the
// same sequence on every platform and standard library.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace kiparc {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1) with 53-bit resolution.
    [[nodiscard]] double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    [[nodiscard]] double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    /// Standard normal via Box-Muller.
    [[nodiscard]] double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    [[nodiscard]] double normal(double mean, double sigma) {
        return mean + sigma * normal();
    }

private:
    std::mt19937_64 engine_;
    double spare_{0.0};
    bool have_spare_{false};
};

} // namespace kiparc
