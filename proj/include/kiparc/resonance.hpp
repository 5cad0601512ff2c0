#pragma once

// =============================================================================
// Resonance solver for the four-section ring.
//
// The fundamental frequencies are the first roots of
//     tan(w l / 8 v_a) * tan(w l / 8 v_b) = Z_a/Z_b   (mode a)
//     tan(w l / 8 v_a) * tan(w l / 8 v_b) = Z_b/Z_a   (mode b)
// The residual has tangent poles interleaved with the roots, so bracketing
// scans must separate sign changes caused by roots from those caused by
// poles before refining.
// =============================================================================

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "kiparc/model.hpp"
#include "kiparc/units.hpp"

namespace kiparc {

/// Frequency band in Hz for root bracketing.
struct Band {
    double f_min;
    double f_max;
};

namespace detail {

inline constexpr double pole_guard_cos = 1e-9;

/// Index of the tangent branch containing angle x: floor((x - pi/2)/pi).
/// Two angles on different branches have a tangent pole between them.
inline double tan_branch(double x) {
    return std::floor((x - 0.5 * std::numbers::pi) / std::numbers::pi);
}

struct RingAngles {
    double c_a;  // l / (8 v_a), seconds
    double c_b;  // l / (8 v_b), seconds
    double z_ratio_a;  // Z_a / Z_b
    double scan_step_hz;

    RingAngles(double velocity_a, double velocity_b, double impedance_ratio_ab,
               double total_length)
        : c_a(total_length / (8.0 * velocity_a)),
          c_b(total_length / (8.0 * velocity_b)),
          z_ratio_a(impedance_ratio_ab),
          scan_step_hz(std::min(velocity_a, velocity_b) / (32.0 * total_length)) {
        require(std::isfinite(velocity_a) && velocity_a > 0.0 &&
                    std::isfinite(velocity_b) && velocity_b > 0.0,
                "velocities must be positive");
        require(std::isfinite(impedance_ratio_ab) && impedance_ratio_ab > 0.0,
                "impedance ratio must be positive");
        require(std::isfinite(total_length) && total_length > 0.0,
                "length must be positive");
    }

    explicit RingAngles(const RingGeometry& g)
        : RingAngles(g.velocity(Mode::a), g.velocity(Mode::b),
                     g.impedance(Mode::a) / g.impedance(Mode::b), g.total_length()) {}

    [[nodiscard]] double ratio(Mode m) const {
        return m == Mode::a ? z_ratio_a : 1.0 / z_ratio_a;
    }
};

} // namespace detail

namespace detail {

inline double guarded_residual(double f_hz, const RingAngles& ring, Mode mode) {
    require(std::isfinite(f_hz) && f_hz > 0.0, "characteristic_residual requires f > 0");
    const double w = hz_to_rad(f_hz);
    const double xa = w * ring.c_a;
    const double xb = w * ring.c_b;
    if (std::abs(std::cos(xa)) <= pole_guard_cos || std::abs(std::cos(xb)) <= pole_guard_cos)
        throw PoleError("characteristic residual evaluated too close to a tangent pole");
    return std::tan(xa) * std::tan(xb) - ring.ratio(mode);
}

/// Residual without the pole guard, for scan/bisection internals. Values
/// near poles are huge but finite and their sign is still meaningful.
inline double raw_residual(double f_hz, const RingAngles& ring, Mode mode) {
    const double w = hz_to_rad(f_hz);
    return std::tan(w * ring.c_a) * std::tan(w * ring.c_b) - ring.ratio(mode);
}

/// True when a tangent pole of either section type lies inside (f1, f2].
inline bool pole_between(double f1, double f2, const RingAngles& ring) {
    for (double c : {ring.c_a, ring.c_b}) {
        if (tan_branch(hz_to_rad(f1) * c) != tan_branch(hz_to_rad(f2) * c)) return true;
    }
    return false;
}

inline double bisect_root(double lo, double hi, const RingAngles& ring, Mode mode) {
    double r_lo = raw_residual(lo, ring, mode);
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if ((hi - lo) <= 1e-13 * mid) break;
        const double r_mid = raw_residual(mid, ring, mode);
        if (r_mid == 0.0) return mid;
        if ((r_lo < 0.0) == (r_mid < 0.0)) {
            lo = mid;
            r_lo = r_mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

inline double solve_single_mode(const RingAngles& ring, Band band, Mode mode) {
    // Grid fine enough that each tangent argument advances well under pi
    // per step, so a step never hides a root-pole pair.
    const double step = ring.scan_step_hz;
    const auto n_steps = static_cast<std::size_t>(
        std::ceil((band.f_max - band.f_min) / step));
    if (n_steps > 20'000'000)
        throw RootSearchError("band too wide for the scan grid; narrow the band");

    std::vector<std::pair<double, double>> brackets;
    double f_prev = band.f_min;
    double r_prev = raw_residual(f_prev, ring, mode);
    for (std::size_t i = 1; i <= n_steps; ++i) {
        const double f = std::min(band.f_min + static_cast<double>(i) * step, band.f_max);
        const double r = raw_residual(f, ring, mode);
        if (!pole_between(f_prev, f, ring) &&
            ((r_prev < 0.0) != (r < 0.0) || r == 0.0 || r_prev == 0.0)) {
            brackets.emplace_back(f_prev, f);
        }
        f_prev = f;
        r_prev = r;
    }

    const std::string tag = mode == Mode::a ? "mode a" : "mode b";
    if (brackets.empty())
        throw RootSearchError("no " + tag + " resonance in band");
    if (brackets.size() > 1)
        throw RootSearchError("multiple " + tag + " roots in band; narrow the band");
    return bisect_root(brackets[0].first, brackets[0].second, ring, mode);
}

} // namespace detail

/// Residual of the characteristic equation at frequency f (Hz); zero exactly
/// at a resonance of the given mode. Throws PoleError within the guard band
/// of a tangent pole.
[[nodiscard]] inline double characteristic_residual(double f_hz, const RingGeometry& geom,
                                                    Mode mode) {
    return detail::guarded_residual(f_hz, detail::RingAngles(geom), mode);
}

/// Equation-level variant: the characteristic equation depends only on the
/// section velocities, the impedance ratio Z_a/Z_b and the ring length, so
/// cases a common-inductance RingGeometry cannot express (equal velocities
/// with unequal impedances) remain reachable.
[[nodiscard]] inline double characteristic_residual(double f_hz, double velocity_a,
                                                    double velocity_b,
                                                    double impedance_ratio_ab,
                                                    double total_length, Mode mode) {
    return detail::guarded_residual(
        f_hz, detail::RingAngles(velocity_a, velocity_b, impedance_ratio_ab, total_length),
        mode);
}

namespace detail {

inline ModePair solve_modes(const RingAngles& ring, Band band) {
    require(std::isfinite(band.f_min) && std::isfinite(band.f_max) && band.f_min > 0.0 &&
                band.f_max > band.f_min,
            "band requires 0 < f_min < f_max");
    return {solve_single_mode(ring, band, Mode::a), solve_single_mode(ring, band, Mode::b)};
}

} // namespace detail

/// Lowest root of each characteristic equation inside `band`, refined to a
/// relative tolerance of 1e-12. The band must contain exactly one root per
/// mode; otherwise RootSearchError reports which mode failed.
[[nodiscard]] inline ModePair solve_mode_frequencies(const RingGeometry& geom, Band band) {
    return detail::solve_modes(detail::RingAngles(geom), band);
}

/// Equation-level variant of solve_mode_frequencies; see
/// characteristic_residual above.
[[nodiscard]] inline ModePair solve_mode_frequencies(double velocity_a, double velocity_b,
                                                     double impedance_ratio_ab,
                                                     double total_length, Band band) {
    return detail::solve_modes(
        detail::RingAngles(velocity_a, velocity_b, impedance_ratio_ab, total_length), band);
}

/// Band from just above DC to just below the first tangent pole; the
/// fundamental root of each mode always lies in this range.
[[nodiscard]] inline Band fundamental_band(const RingGeometry& geom) {
    const double v_min = std::min(geom.velocity(Mode::a), geom.velocity(Mode::b));
    const double f_pole = 2.0 * v_min / geom.total_length();
    return {1e-4 * f_pole, f_pole * (1.0 - 1e-7)};
}

// -----------------------------------------------------------------------------
// Standing-wave profiles
// -----------------------------------------------------------------------------

/// Piecewise-sinusoidal standing-wave profile over the four sections.
/// Positions are arc length from the start of section 1 (port 1 sits at the
/// center of section 1); each section contributes samples including both of
/// its boundary points, so continuity is directly visible in the arrays.
/// Amplitudes carry the common normalization that makes max |voltage| = 1.
struct ModeProfile {
    struct Section {
        double amplitude;  // charge-wave amplitude of the section
        double phase;      // rad
    };

    std::vector<double> positions;  // m
    std::vector<double> voltage;
    std::vector<double> current;
    std::array<Section, 4> sections;
};

/// Voltage/current standing-wave profile of one mode. The frequency pair
/// must solve the geometry; otherwise the two boundary conditions cannot be
/// met simultaneously and InconsistentModeError is thrown.
[[nodiscard]] inline ModeProfile mode_profile(const RingGeometry& geom, const ModePair& modes,
                                              Mode mode, int samples_per_section) {
    detail::require(samples_per_section >= 3, "samples_per_section must be >= 3");

    const double w = hz_to_rad(modes.frequency(mode));
    const double l8 = geom.total_length() / 8.0;
    const double k1 = w / geom.velocity(Mode::a);  // sections 1 and 3
    const double k2 = w / geom.velocity(Mode::b);  // sections 2 and 4

    // Symmetry fixes the per-section phases; continuity at the section-1/2
    // joint fixes the amplitude ratio. The current and voltage conditions
    // must agree, which is exactly the characteristic equation.
    double amp2_current, amp2_voltage;
    std::array<double, 4> phases{};
    if (mode == Mode::a) {
        for (int j = 0; j < 4; ++j) phases[j] = j * std::numbers::pi / 2.0;
        amp2_current = std::sin(k1 * l8) / std::cos(k2 * l8);
        amp2_voltage = geom.impedance(Mode::a) / geom.impedance(Mode::b) *
                       std::cos(k1 * l8) / std::sin(k2 * l8);
    } else {
        for (int j = 0; j < 4; ++j) phases[j] = (j + 1) * std::numbers::pi / 2.0;
        amp2_current = std::cos(k1 * l8) / std::sin(k2 * l8);
        amp2_voltage = geom.impedance(Mode::a) / geom.impedance(Mode::b) *
                       std::sin(k1 * l8) / std::cos(k2 * l8);
    }
    const double scale_ref = std::max(std::abs(amp2_current), std::abs(amp2_voltage));
    if (!(std::isfinite(amp2_current) && std::isfinite(amp2_voltage)) ||
        std::abs(amp2_current - amp2_voltage) > 1e-8 * scale_ref)
        throw InconsistentModeError(
            "frequency does not satisfy both boundary conditions; not a resonance");

    const std::array<double, 4> amps{1.0, amp2_current, 1.0, amp2_current};
    const std::array<double, 4> wavenumbers{k1, k2, k1, k2};

    ModeProfile profile;
    const int n = samples_per_section;
    profile.positions.reserve(static_cast<std::size_t>(4 * n));
    profile.voltage.reserve(static_cast<std::size_t>(4 * n));
    profile.current.reserve(static_cast<std::size_t>(4 * n));

    for (int j = 0; j < 4; ++j) {
        const double z_j = geom.impedance(j % 2 == 0 ? Mode::a : Mode::b);
        const double s0 = j * geom.section_length();
        for (int i = 0; i < n; ++i) {
            // local coordinate runs [-l/8, l/8] with the port at 0
            const double x = -l8 + 2.0 * l8 * static_cast<double>(i) / (n - 1);
            const double arg = wavenumbers[j] * x + phases[j];
            profile.positions.push_back(s0 + (x + l8));
            profile.voltage.push_back(z_j * amps[j] * std::cos(arg));
            profile.current.push_back(amps[j] * std::sin(arg));
        }
    }

    double v_max = 0.0;
    for (double v : profile.voltage) v_max = std::max(v_max, std::abs(v));
    const double norm = 1.0 / v_max;
    for (double& v : profile.voltage) v *= norm;
    for (double& c : profile.current) c *= norm;
    for (int j = 0; j < 4; ++j) profile.sections[j] = {amps[j] * norm, phases[j]};
    return profile;
}

// -----------------------------------------------------------------------------
// DC-current tuning
// -----------------------------------------------------------------------------

/// Inductance ratio L(I)/L0 >= 1 for the given mode. The applied current
/// splits over the two ring branches, hence the factor 1/2 inside.
[[nodiscard]] inline double inductance_factor(double i_dc, const TuningModel& tuning,
                                              Mode mode) {
    detail::require(std::isfinite(i_dc) && i_dc >= 0.0, "i_dc must be >= 0");
    const double u = (0.5 * i_dc) / tuning.i_star(mode);
    const double u2 = u * u;
    return 1.0 + u2 + tuning.alpha(mode) * u2 * u2;
}

/// Resonance pair at each bias current: f_m(I) = f0_m / sqrt(L(I)/L0).
/// Exact, because a uniform inductance rescaling leaves the impedance ratio
/// unchanged and scales both phase velocities identically.
[[nodiscard]] inline std::vector<ModePair> tuning_curve(const TuningModel& tuning,
                                                        std::span<const double> currents) {
    for (std::size_t i = 0; i < currents.size(); ++i) {
        detail::require(std::isfinite(currents[i]) && currents[i] >= 0.0,
                        "currents must be nonnegative");
        detail::require(i == 0 || currents[i] > currents[i - 1],
                        "currents must be strictly ascending");
    }
    std::vector<ModePair> out;
    out.reserve(currents.size());
    for (double i_dc : currents) {
        out.emplace_back(
            tuning.f0_a / std::sqrt(inductance_factor(i_dc, tuning, Mode::a)),
            tuning.f0_b / std::sqrt(inductance_factor(i_dc, tuning, Mode::b)));
    }
    return out;
}

} // namespace kiparc
