#pragma once

// =============================================================================
// Core domain types shared by the resonance solver, the scattering engine
// and the estimators. All values are immutable after construction and every
// constructor enforces the type's invariants, so downstream code never
// revalidates.
// =============================================================================

#include <cmath>
#include <complex>
#include <map>
#include <string>

#include "kiparc/errors.hpp"
#include "kiparc/units.hpp"

namespace kiparc {

using Complex = std::complex<double>;

/// The two fundamental standing-wave modes of the ring. Mode a has voltage
/// antinodes at ports 1/3, mode b at ports 2/4.
enum class Mode { a, b };

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw DomainError(what);
}

inline void require_finite_positive(double v, const std::string& name) {
    require(std::isfinite(v) && v > 0.0, name + " must be finite and > 0");
}

} // namespace detail

// -----------------------------------------------------------------------------
// RingGeometry
// -----------------------------------------------------------------------------

/// Transmission-line description of the four-section ring. The four sections
/// have equal length total_length/4 by construction; sections adjacent to
/// ports 1/3 carry cap_a, those adjacent to ports 2/4 carry cap_b, and the
/// inductance per length is common to all sections.
class RingGeometry {
public:
    RingGeometry(double total_length_m, double inductance_per_length,
                 double cap_a, double cap_b)
        : total_length_(total_length_m),
          inductance_per_length_(inductance_per_length),
          cap_a_(cap_a),
          cap_b_(cap_b) {
        detail::require_finite_positive(total_length_m, "total_length");
        detail::require_finite_positive(inductance_per_length, "inductance_per_length");
        detail::require_finite_positive(cap_a, "cap_a");
        detail::require_finite_positive(cap_b, "cap_b");
        detail::require(std::isfinite(impedance(Mode::a)) && std::isfinite(velocity(Mode::a)) &&
                            std::isfinite(impedance(Mode::b)) && std::isfinite(velocity(Mode::b)),
                        "derived impedances/velocities must be finite");
    }

    [[nodiscard]] double total_length() const { return total_length_; }
    [[nodiscard]] double inductance_per_length() const { return inductance_per_length_; }
    [[nodiscard]] double capacitance(Mode m) const { return m == Mode::a ? cap_a_ : cap_b_; }

    /// Characteristic impedance sqrt(L/C) of the section type.
    [[nodiscard]] double impedance(Mode m) const {
        return std::sqrt(inductance_per_length_ / capacitance(m));
    }

    /// Phase velocity 1/sqrt(L C) of the section type.
    [[nodiscard]] double velocity(Mode m) const {
        return 1.0 / std::sqrt(inductance_per_length_ * capacitance(m));
    }

    [[nodiscard]] double section_length() const { return total_length_ / 4.0; }

    /// Same ring with the common inductance multiplied by `factor`.
    [[nodiscard]] RingGeometry scaled_inductance(double factor) const {
        detail::require_finite_positive(factor, "inductance scale factor");
        return {total_length_, inductance_per_length_ * factor, cap_a_, cap_b_};
    }

private:
    double total_length_;
    double inductance_per_length_;
    double cap_a_;
    double cap_b_;
};

// -----------------------------------------------------------------------------
// ModePair
// -----------------------------------------------------------------------------

/// The two fundamental resonance frequencies in Hz.
struct ModePair {
    double f_a;
    double f_b;

    ModePair(double fa_hz, double fb_hz) : f_a(fa_hz), f_b(fb_hz) {
        detail::require_finite_positive(fa_hz, "f_a");
        detail::require_finite_positive(fb_hz, "f_b");
    }

    [[nodiscard]] double frequency(Mode m) const { return m == Mode::a ? f_a : f_b; }
};

// -----------------------------------------------------------------------------
// TuningModel
// -----------------------------------------------------------------------------

/// DC-current tuning model: zero-current resonances plus a per-mode
/// nonlinear current scale and quartic coefficient. The inductance ratio
/// L(I)/L0 = 1 + (I/2/I*)^2 + alpha (I/2/I*)^4 stays >= 1 for alpha >= 0.
struct TuningModel {
    double f0_a;      // Hz
    double f0_b;      // Hz
    double i_star_a;  // A
    double i_star_b;  // A
    double alpha_a;
    double alpha_b;

    TuningModel(double f0a, double f0b, double istar_a, double istar_b,
                double alph_a = 0.0, double alph_b = 0.0)
        : f0_a(f0a), f0_b(f0b), i_star_a(istar_a), i_star_b(istar_b),
          alpha_a(alph_a), alpha_b(alph_b) {
        detail::require_finite_positive(f0a, "f0_a");
        detail::require_finite_positive(f0b, "f0_b");
        detail::require_finite_positive(istar_a, "i_star_a");
        detail::require_finite_positive(istar_b, "i_star_b");
        detail::require(std::isfinite(alph_a) && alph_a >= 0.0, "alpha_a must be >= 0");
        detail::require(std::isfinite(alph_b) && alph_b >= 0.0, "alpha_b must be >= 0");
    }

    [[nodiscard]] double f0(Mode m) const { return m == Mode::a ? f0_a : f0_b; }
    [[nodiscard]] double i_star(Mode m) const { return m == Mode::a ? i_star_a : i_star_b; }
    [[nodiscard]] double alpha(Mode m) const { return m == Mode::a ? alpha_a : alpha_b; }
};

// -----------------------------------------------------------------------------
// ScatteringParams
// -----------------------------------------------------------------------------

/// Linearized two-mode response in the frame rotating at half the pump
/// frequency: coupling rates of mode a to ports 1/3 and mode b to ports 2/4,
/// the complex three-wave-mixing rate, and the two mode detunings.
/// All rates in rad/s.
struct ScatteringParams {
    double kappa_a;
    double kappa_b;
    Complex xi;
    double delta_a;
    double delta_b;

    ScatteringParams(double ka, double kb, Complex xi_rate,
                     double da = 0.0, double db = 0.0)
        : kappa_a(ka), kappa_b(kb), xi(xi_rate), delta_a(da), delta_b(db) {
        detail::require_finite_positive(ka, "kappa_a");
        detail::require_finite_positive(kb, "kappa_b");
        detail::require(std::isfinite(xi_rate.real()) && std::isfinite(xi_rate.imag()),
                        "xi must be finite");
        detail::require(std::isfinite(da) && std::isfinite(db), "detunings must be finite");
    }

    [[nodiscard]] ScatteringParams with_detunings(double da, double db) const {
        return {kappa_a, kappa_b, xi, da, db};
    }

    /// Mixing strength at which the zero-detuning gain diverges.
    [[nodiscard]] double oscillation_threshold() const {
        return 2.0 * std::sqrt(kappa_a * kappa_b);
    }
};

// -----------------------------------------------------------------------------
// DeviceModes
// -----------------------------------------------------------------------------

/// Lab-frame device description: the two mode frequencies plus a coupling/
/// mixing template whose detunings are filled in once a pump is chosen.
struct DeviceModes {
    double omega_a;  // rad/s
    double omega_b;  // rad/s
    ScatteringParams params;

    DeviceModes(double wa, double wb, ScatteringParams p)
        : omega_a(wa), omega_b(wb), params(p.with_detunings(0.0, 0.0)) {
        detail::require(std::isfinite(wa) && std::isfinite(wb) && wa > 0.0 && wb > wa,
                        "device modes require omega_b > omega_a > 0");
    }
};

// -----------------------------------------------------------------------------
// DriveState
// -----------------------------------------------------------------------------

/// Coherent drive: alpha enters port 1 at the idler frequency, beta enters
/// port 2 at the signal frequency. Ports 3 and 4 see vacuum. Amplitudes are
/// dimensionless; squared magnitude is proportional to photon flux.
struct DriveState {
    Complex alpha{0.0, 0.0};
    Complex beta{0.0, 0.0};
};

// -----------------------------------------------------------------------------
// GainSet
// -----------------------------------------------------------------------------

/// The four complex amplitude gains at one evaluation detuning, plus the two
/// denominators they were built from. Construction rejects vanishing
/// denominators; a valid GainSet is always finite.
class GainSet {
public:
    GainSet(Complex gss, Complex gsi, Complex gii, Complex gis, Complex ds, Complex di)
        : g_ss_(gss), g_si_(gsi), g_ii_(gii), g_is_(gis), d_s_(ds), d_i_(di) {
        if (ds == Complex{0.0, 0.0} || di == Complex{0.0, 0.0})
            throw PoleError("gain denominators must be nonzero");
    }

    [[nodiscard]] Complex g_ss() const { return g_ss_; }
    [[nodiscard]] Complex g_si() const { return g_si_; }
    [[nodiscard]] Complex g_ii() const { return g_ii_; }
    [[nodiscard]] Complex g_is() const { return g_is_; }
    [[nodiscard]] Complex d_s() const { return d_s_; }
    [[nodiscard]] Complex d_i() const { return d_i_; }

private:
    Complex g_ss_, g_si_, g_ii_, g_is_;
    Complex d_s_, d_i_;
};

// -----------------------------------------------------------------------------
// QuadratureSample
// -----------------------------------------------------------------------------

/// Real quadratures of the two outputs; (i_s + i q_s) is the complex signal
/// output amplitude and (i_i + i q_i) the idler one, same normalization as
/// the drive amplitudes.
struct QuadratureSample {
    double i_s{0.0};
    double q_s{0.0};
    double i_i{0.0};
    double q_i{0.0};

    [[nodiscard]] Complex signal() const { return {i_s, q_s}; }
    [[nodiscard]] Complex idler() const { return {i_i, q_i}; }

    [[nodiscard]] static QuadratureSample from_outputs(Complex signal_out, Complex idler_out) {
        return {signal_out.real(), signal_out.imag(), idler_out.real(), idler_out.imag()};
    }
};

// -----------------------------------------------------------------------------
// FitResult
// -----------------------------------------------------------------------------

/// Estimated parameters with one-sigma standard errors and convergence
/// diagnostics. `converged` is set only when the residual gradient norm fell
/// below the optimizer tolerance.
struct FitResult {
    std::map<std::string, double> parameters;
    std::map<std::string, double> standard_errors;
    double residual_norm{0.0};
    int iterations{0};
    bool converged{false};

    [[nodiscard]] double parameter(const std::string& name) const {
        auto it = parameters.find(name);
        if (it == parameters.end()) throw DomainError("no fitted parameter named " + name);
        return it->second;
    }

    [[nodiscard]] double standard_error(const std::string& name) const {
        auto it = standard_errors.find(name);
        if (it == standard_errors.end()) throw DomainError("no standard error named " + name);
        return it->second;
    }
};

} // namespace kiparc
