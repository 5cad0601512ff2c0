#pragma once

// Shared fixtures and independent oracles for the test suites. The oracle
// below computes the amplitude gains along a different algebraic route than
// the library (numeric 2x2 matrix inversion of the coupled-mode response
// instead of the closed-form expressions), so agreement is a genuine
// dual-route check.

#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "kiparc/model.hpp"
#include "kiparc/random.hpp"
#include "kiparc/units.hpp"

namespace kiparc::testing {

/// Ring of the measured device: 2.2 mm, 40 pH/sq at 0.4 um width giving
/// 1e-4 H/m, section impedances 940 and 1320 ohm.
inline RingGeometry device_ring() {
    const double inductance = 1.0e-4;
    const double z_a = 940.0, z_b = 1320.0;
    return {2.2e-3, inductance, inductance / (z_a * z_a), inductance / (z_b * z_b)};
}

/// Couplings and mixing rate fitted to the measured signal gain map
/// (values in MHz converted to rad/s).
inline ScatteringParams map_fit_params() {
    return {hz_to_rad(4.597e6), hz_to_rad(3.210e6), Complex{hz_to_rad(7.408e6), 0.0}};
}

struct OracleGains {
    Complex g_ss, g_si, g_ii, g_is;
};

/// Amplitude gains from the 2x2 coupled-mode matrices, inverted numerically.
inline OracleGains oracle_gains(const ScatteringParams& sp, double delta) {
    const Complex i{0.0, 1.0};
    const auto block = [&](double k1, double d1, double k2, double d2, Complex xi) {
        // [[k1 - i(delta - d1), i xi / 2], [-i conj(xi)/2, k2 - i(delta + d2)]]
        const std::array<Complex, 4> m{k1 - i * (delta - d1), i * xi * 0.5,
                                       -i * std::conj(xi) * 0.5, k2 - i * (delta + d2)};
        const Complex det = m[0] * m[3] - m[1] * m[2];
        return std::array<Complex, 4>{m[3] / det, -m[1] / det, -m[2] / det, m[0] / det};
    };
    const auto inv_ab = block(sp.kappa_a, sp.delta_a, sp.kappa_b, sp.delta_b, sp.xi);
    const auto inv_ba = block(sp.kappa_b, sp.delta_b, sp.kappa_a, sp.delta_a, sp.xi);
    const double ra = std::sqrt(sp.kappa_a), rb = std::sqrt(sp.kappa_b);
    OracleGains g;
    g.g_ii = -ra * inv_ab[0] * ra;
    g.g_si = -ra * inv_ab[1] * rb;
    g.g_ss = -rb * inv_ba[0] * rb;
    g.g_is = -rb * inv_ba[1] * ra;
    return g;
}

/// Random below-threshold parameter set for property tests.
inline ScatteringParams random_params(Rng& rng) {
    const double ka = rng.uniform(0.5, 10.0);
    const double kb = rng.uniform(0.5, 10.0);
    const double xi_mag = rng.uniform(0.0, 0.95 * 2.0 * std::sqrt(ka * kb));
    return {ka, kb, std::polar(xi_mag, rng.uniform(-std::numbers::pi, std::numbers::pi)),
            rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0)};
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = n == 1 ? lo
                        : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return out;
}

/// n phases from -pi inclusive, endpoint excluded.
inline std::vector<double> phase_grid(std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = -std::numbers::pi + two_pi * static_cast<double>(i) / static_cast<double>(n);
    return out;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

} // namespace kiparc::testing
