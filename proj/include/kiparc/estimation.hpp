#pragma once

// =============================================================================
// Parameter estimation against the forward models.
//
// Conventions shared by all fitters:
//  - datasets carry boundary units (Hz, A, dB, linear gain);
//  - positive rates (couplings, mixing rate, currents, frequencies) are
//    fitted through their logarithms, quartic tuning coefficients linearly;
//  - gain-type residuals are computed in dB by default (linear optional);
//  - optional per-point inverse-variance weights multiply residuals by
//    sqrt(w);
//  - reported standard errors come from the local quadratic model of the
//    cost at the optimum, scaled by the residual variance.
// =============================================================================

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "kiparc/frames.hpp"
#include "kiparc/leastsq.hpp"
#include "kiparc/model.hpp"
#include "kiparc/scattering.hpp"
#include "kiparc/units.hpp"

namespace kiparc {

enum class DatasetKind { gain_map, gain_slice, tuning, fringe, noise };
enum class Channel { signal, idler };

/// Flat measurement table. Column meaning per kind:
///   gain_map/gain_slice: coord1 = omega_s - omega_b (Hz), coord2 = omega_i -
///     omega_a (Hz), values = gain dB of `channel`
///   tuning: coord1 = bias current (A), coord2 = mode index (0 = a, 1 = b),
///     values = resonance (Hz)
///   fringe: coord1 = signal phase (rad), coord2 = channel index (0 = signal,
///     1 = idler), values = gain dB relative to signal input
///   noise: coord1 = linear power gain, coord2 unused, values = linear NF
struct Dataset {
    DatasetKind kind{DatasetKind::gain_map};
    Channel channel{Channel::signal};
    std::vector<double> coord1;
    std::vector<double> coord2;
    std::vector<double> values;
    std::vector<double> weights;  // empty or per-point inverse variances

    [[nodiscard]] std::size_t size() const { return values.size(); }

    void validate() const {
        detail::require(coord1.size() == values.size() && coord2.size() == values.size(),
                        "dataset coordinates and values must have equal length");
        detail::require(!values.empty(), "dataset is empty");
        detail::require(weights.empty() || weights.size() == values.size(),
                        "weights must be absent or per-point");
        for (double w : weights)
            detail::require(std::isfinite(w) && w > 0.0, "weights must be positive");
        for (double v : coord1) detail::require(std::isfinite(v), "coordinate not finite");
        for (double v : coord2) detail::require(std::isfinite(v), "coordinate not finite");
        for (double v : values) detail::require(std::isfinite(v), "value not finite");
    }

    [[nodiscard]] double weight_sqrt(std::size_t i) const {
        return weights.empty() ? 1.0 : std::sqrt(weights[i]);
    }
};

enum class ResidualSpace { decibel, linear };

struct FitOptions {
    int max_iterations = 200;
    ResidualSpace residual_space = ResidualSpace::decibel;
    bool fit_axis_offsets = false;  // gain map: also fit the map-center offsets
    bool fit_alpha = false;         // tuning: free the quartic coefficient
};

namespace detail {

inline LeastSquaresOptions to_lsq_options(const FitOptions& o) {
    LeastSquaresOptions lo;
    lo.max_iterations = o.max_iterations;
    return lo;
}

inline void throw_if_exhausted(const LeastSquaresSummary& s, const FitOptions& o,
                               const std::string& fit_name) {
    if (!s.converged && s.iterations >= o.max_iterations)
        throw ConvergenceError(fit_name + " did not converge within " +
                               std::to_string(o.max_iterations) + " iterations");
}

/// Residual in the chosen space between a model gain (dB) and a datum (dB).
inline double gain_residual(double model_db, double value_db, ResidualSpace space) {
    if (space == ResidualSpace::decibel) return model_db - value_db;
    return db_to_power(model_db) - db_to_power(value_db);
}

} // namespace detail

// -----------------------------------------------------------------------------
// Gain-map fit
// -----------------------------------------------------------------------------

/// Least-squares fit of (kappa_a, kappa_b, |xi|) -- optionally plus the map
/// center offsets -- to a measured gain map or slice. The initial guess must
/// sit below the oscillation threshold; optimizer steps that would cross it
/// are rejected, never evaluated.
///
/// Fitted parameters (rad/s): kappa_a, kappa_b, xi_mag, and with
/// fit_axis_offsets also x_offset, y_offset.
[[nodiscard]] inline FitResult fit_gain_map(const Dataset& data, const DeviceModes& modes,
                                            const ScatteringParams& init,
                                            const FitOptions& options = {}) {
    data.validate();
    detail::require(data.kind == DatasetKind::gain_map || data.kind == DatasetKind::gain_slice,
                    "fit_gain_map requires a gain_map or gain_slice dataset");
    const bool idler = data.channel == Channel::idler;
    const std::size_t npts = data.size();

    std::vector<double> p0{std::log(init.kappa_a), std::log(init.kappa_b),
                           std::log(std::abs(init.xi))};
    detail::require(std::isfinite(p0[2]), "initial |xi| must be positive");
    // offsets are carried in units of the initial coupling sum so their
    // finite-difference steps resolve the model
    const double offset_scale = init.kappa_a + init.kappa_b;
    if (options.fit_axis_offsets) {
        p0.push_back(0.0);
        p0.push_back(0.0);
    }

    auto residual = [&](std::span<const double> p, std::vector<double>& out) {
        const double ka = std::exp(p[0]);
        const double kb = std::exp(p[1]);
        const double xi = std::exp(p[2]);
        if (!std::isfinite(ka) || !std::isfinite(kb) || !std::isfinite(xi)) return false;
        // reject steps at/over the oscillation threshold rather than letting
        // the optimizer cross onto the unphysical supercritical branch
        if (xi >= 2.0 * std::sqrt(ka * kb) * (1.0 - 1e-9)) return false;
        const double x0 = options.fit_axis_offsets ? p[3] * offset_scale : 0.0;
        const double y0 = options.fit_axis_offsets ? p[4] * offset_scale : 0.0;
        const ScatteringParams sp{ka, kb, Complex{xi, 0.0}};
        out.resize(npts);
        try {
            for (std::size_t i = 0; i < npts; ++i) {
                const FramePoint fp = map_axes_to_frame(
                    modes, hz_to_rad(data.coord1[i]) - x0, hz_to_rad(data.coord2[i]) - y0);
                const ScatteringParams point =
                    sp.with_detunings(fp.params.delta_a, fp.params.delta_b);
                const GainSet gains =
                    amplitude_gains(point, idler ? -fp.delta : fp.delta);
                const double model_db =
                    power_db(std::norm(idler ? gains.g_si() : gains.g_ss()));
                out[i] = data.weight_sqrt(i) *
                         detail::gain_residual(model_db, data.values[i],
                                               options.residual_space);
            }
        } catch (const PoleError&) {
            return false;  // step into/beyond threshold: rejected
        }
        return true;
    };

    const LeastSquaresSummary s =
        minimize_least_squares(residual, p0, detail::to_lsq_options(options));
    detail::throw_if_exhausted(s, options, "fit_gain_map");

    FitResult fit;
    const char* names[] = {"kappa_a", "kappa_b", "xi_mag"};
    for (int j = 0; j < 3; ++j) {
        const double value = std::exp(s.parameters[j]);
        fit.parameters[names[j]] = value;
        fit.standard_errors[names[j]] = value * s.standard_errors[j];
    }
    if (options.fit_axis_offsets) {
        fit.parameters["x_offset"] = s.parameters[3] * offset_scale;
        fit.parameters["y_offset"] = s.parameters[4] * offset_scale;
        fit.standard_errors["x_offset"] = s.standard_errors[3] * offset_scale;
        fit.standard_errors["y_offset"] = s.standard_errors[4] * offset_scale;
    }
    fit.residual_norm = s.residual_norm;
    fit.iterations = s.iterations;
    fit.converged = s.converged;
    return fit;
}

// -----------------------------------------------------------------------------
// Tuning-curve fit
// -----------------------------------------------------------------------------

/// Per-mode fit of f(I) = f0 / sqrt(1 + (I/2I*)^2 + alpha (I/2I*)^4).
/// alpha stays frozen at its initial value unless options.fit_alpha is set.
/// Fitted parameters: f0_a, i_star_a, f0_b, i_star_b (Hz, A), plus alpha_a,
/// alpha_b when freed.
[[nodiscard]] inline FitResult fit_tuning_curve(const Dataset& data, const TuningModel& init,
                                                const FitOptions& options = {}) {
    data.validate();
    detail::require(data.kind == DatasetKind::tuning, "fit_tuning_curve requires tuning data");

    FitResult fit;
    double cost = 0.0;
    int iterations = 0;
    bool converged = true;

    for (Mode mode : {Mode::a, Mode::b}) {
        const double mode_index = mode == Mode::a ? 0.0 : 1.0;
        std::vector<double> currents, freqs, wsqrt;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (data.coord2[i] != mode_index) continue;
            currents.push_back(data.coord1[i]);
            freqs.push_back(data.values[i]);
            wsqrt.push_back(data.weight_sqrt(i));
        }
        std::set<double> distinct(currents.begin(), currents.end());
        detail::require(distinct.size() >= 4,
                        "tuning fit needs at least 4 distinct currents per mode");

        std::vector<double> p0{std::log(init.f0(mode)), std::log(init.i_star(mode))};
        if (options.fit_alpha) p0.push_back(init.alpha(mode));
        const double frozen_alpha = init.alpha(mode);

        auto residual = [&](std::span<const double> p, std::vector<double>& out) {
            const double f0 = std::exp(p[0]);
            const double istar = std::exp(p[1]);
            const double alpha = options.fit_alpha ? p[2] : frozen_alpha;
            if (!std::isfinite(f0) || !std::isfinite(istar) || !std::isfinite(alpha))
                return false;
            out.resize(currents.size());
            for (std::size_t i = 0; i < currents.size(); ++i) {
                const double u2 = std::pow(0.5 * currents[i] / istar, 2);
                const double factor = 1.0 + u2 + alpha * u2 * u2;
                if (!(factor > 0.0)) return false;
                out[i] = wsqrt[i] * (f0 / std::sqrt(factor) - freqs[i]);
            }
            return true;
        };

        const LeastSquaresSummary s =
            minimize_least_squares(residual, p0, detail::to_lsq_options(options));
        detail::throw_if_exhausted(s, options, "fit_tuning_curve");
        if (s.condition_number > 1e8)
            throw IllConditionedError(
                "tuning currents span too little of I* to constrain the fit "
                "(condition number " + std::to_string(s.condition_number) + ")");

        const std::string suffix = mode == Mode::a ? "_a" : "_b";
        const double f0 = std::exp(s.parameters[0]);
        const double istar = std::exp(s.parameters[1]);
        fit.parameters["f0" + suffix] = f0;
        fit.standard_errors["f0" + suffix] = f0 * s.standard_errors[0];
        fit.parameters["i_star" + suffix] = istar;
        fit.standard_errors["i_star" + suffix] = istar * s.standard_errors[1];
        if (options.fit_alpha) {
            fit.parameters["alpha" + suffix] = s.parameters[2];
            fit.standard_errors["alpha" + suffix] = s.standard_errors[2];
        }
        cost += s.cost;
        iterations = std::max(iterations, s.iterations);
        converged = converged && s.converged;
    }

    fit.residual_norm = std::sqrt(cost);
    fit.iterations = iterations;
    fit.converged = converged;
    return fit;
}

// -----------------------------------------------------------------------------
// Fringe fit
// -----------------------------------------------------------------------------

/// Joint fit of the interference fringes to (kappa_a, kappa_b, |xi|,
/// P_i/P_s) plus one phase offset per output channel. Detunings are part of
/// the known operating point (init detunings and `delta`), not fitted.
///
/// A fringe at the exact two-mode resonance point determines only the
/// combinations (kappa_a kappa_b, |xi|, P_i/P_s); separating kappa_a from
/// kappa_b needs data from a detuned operating point and both channels.
///
/// Fitted parameters: kappa_a, kappa_b, xi_mag (rad/s), power_ratio, and
/// phase_s / phase_i (rad) for the channels present in the data.
[[nodiscard]] inline FitResult fit_fringe(const Dataset& data, const ScatteringParams& init,
                                          double delta, double power_ratio_guess,
                                          const FitOptions& options = {}) {
    data.validate();
    detail::require(data.kind == DatasetKind::fringe, "fit_fringe requires fringe data");
    detail::require(std::isfinite(power_ratio_guess) && power_ratio_guess > 0.0,
                    "power_ratio_guess must be > 0");

    bool have_channel[2] = {false, false};
    double phase_min = std::numeric_limits<double>::infinity();
    double phase_max = -phase_min;
    double value_min[2], value_max[2];
    value_min[0] = value_min[1] = std::numeric_limits<double>::infinity();
    value_max[0] = value_max[1] = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < data.size(); ++i) {
        detail::require(data.coord2[i] == 0.0 || data.coord2[i] == 1.0,
                        "fringe channel index must be 0 (signal) or 1 (idler)");
        const int c = static_cast<int>(data.coord2[i]);
        have_channel[c] = true;
        phase_min = std::min(phase_min, data.coord1[i]);
        phase_max = std::max(phase_max, data.coord1[i]);
        value_min[c] = std::min(value_min[c], data.values[i]);
        value_max[c] = std::max(value_max[c], data.values[i]);
    }
    detail::require(phase_max - phase_min >= 0.95 * two_pi,
                    "fringe data must span a full phase period");
    for (int c = 0; c < 2; ++c) {
        if (have_channel[c] && value_max[c] - value_min[c] < 1e-6)
            throw DegenerateInputError(
                "fringe data is phase independent (single-input data); nothing to fit");
    }

    // self-starting phase offsets: the fringe minimum of channel c sits
    // where cos(phase + offset) = -1
    double phase_at_min[2] = {0.0, 0.0};
    double min_value[2] = {std::numeric_limits<double>::infinity(),
                           std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < data.size(); ++i) {
        const int c = static_cast<int>(data.coord2[i]);
        if (data.values[i] < min_value[c]) {
            min_value[c] = data.values[i];
            phase_at_min[c] = data.coord1[i];
        }
    }

    // parameter order: ln ka, ln kb, ln xi, ln ratio, [phase_s], [phase_i]
    std::vector<double> p0{std::log(init.kappa_a), std::log(init.kappa_b),
                           std::log(std::abs(init.xi)), std::log(power_ratio_guess)};
    detail::require(std::isfinite(p0[2]), "initial |xi| must be positive");
    int phase_index[2] = {-1, -1};
    for (int c = 0; c < 2; ++c) {
        if (have_channel[c]) {
            phase_index[c] = static_cast<int>(p0.size());
            p0.push_back(std::numbers::pi - phase_at_min[c]);
        }
    }

    auto residual = [&](std::span<const double> p, std::vector<double>& out) {
        const double ka = std::exp(p[0]);
        const double kb = std::exp(p[1]);
        const double xi = std::exp(p[2]);
        const double ratio = std::exp(p[3]);
        if (!std::isfinite(ka) || !std::isfinite(kb) || !std::isfinite(xi) ||
            !std::isfinite(ratio))
            return false;
        if (xi >= 2.0 * std::sqrt(ka * kb) * (1.0 - 1e-9)) return false;
        const ScatteringParams sp{ka, kb, Complex{xi, 0.0}, init.delta_a, init.delta_b};
        double amp[2], stat[2];
        try {
            const GainSet signal_rows = amplitude_gains(sp, delta);
            const GainSet idler_rows = amplitude_gains(sp, -delta);
            // each channel is a two-phasor fringe: rotating term + static term
            amp[0] = std::abs(signal_rows.g_ss());
            stat[0] = std::abs(signal_rows.g_is()) * std::sqrt(ratio);
            amp[1] = std::abs(idler_rows.g_si());
            stat[1] = std::abs(idler_rows.g_ii()) * std::sqrt(ratio);
        } catch (const PoleError&) {
            return false;
        }
        out.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            const int c = static_cast<int>(data.coord2[i]);
            const double phase = data.coord1[i] + p[phase_index[c]];
            const double power = amp[c] * amp[c] + stat[c] * stat[c] +
                                 2.0 * amp[c] * stat[c] * std::cos(phase);
            out[i] = data.weight_sqrt(i) * detail::gain_residual(power_db(power),
                                                                 data.values[i],
                                                                 options.residual_space);
        }
        return true;
    };

    const LeastSquaresSummary s =
        minimize_least_squares(residual, p0, detail::to_lsq_options(options));
    detail::throw_if_exhausted(s, options, "fit_fringe");

    FitResult fit;
    const char* names[] = {"kappa_a", "kappa_b", "xi_mag", "power_ratio"};
    for (int j = 0; j < 4; ++j) {
        const double value = std::exp(s.parameters[j]);
        fit.parameters[names[j]] = value;
        fit.standard_errors[names[j]] = value * s.standard_errors[j];
    }
    const char* phase_names[] = {"phase_s", "phase_i"};
    for (int c = 0; c < 2; ++c) {
        if (phase_index[c] >= 0) {
            fit.parameters[phase_names[c]] = s.parameters[phase_index[c]];
            fit.standard_errors[phase_names[c]] = s.standard_errors[phase_index[c]];
        }
    }
    fit.residual_norm = s.residual_norm;
    fit.iterations = s.iterations;
    fit.converged = s.converged;
    return fit;
}

// -----------------------------------------------------------------------------
// Noise-figure fit
// -----------------------------------------------------------------------------

/// One-parameter fit of the device-to-system noise ratio to NF(G) data.
/// Self-starting: the smallest measured NF seeds the asymptote. Residuals in
/// linear NF by default.
[[nodiscard]] inline FitResult fit_noise(const Dataset& data, const FitOptions& options = {
                                             .residual_space = ResidualSpace::linear}) {
    data.validate();
    detail::require(data.kind == DatasetKind::noise, "fit_noise requires noise data");
    double g_min = std::numeric_limits<double>::infinity(), g_max = 0.0, v_min = 1e300;
    for (std::size_t i = 0; i < data.size(); ++i) {
        detail::require(data.coord1[i] >= 1.0, "noise data requires linear gains >= 1");
        g_min = std::min(g_min, data.coord1[i]);
        g_max = std::max(g_max, data.coord1[i]);
        v_min = std::min(v_min, data.values[i]);
    }
    detail::require(g_max >= 10.0 * g_min, "noise data must span at least a decade of gain");

    const double n0 = std::clamp(v_min, 1e-9, 1e3);
    auto residual = [&](std::span<const double> p, std::vector<double>& out) {
        const double n = std::exp(p[0]);
        if (!std::isfinite(n)) return false;
        out.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double model = noise_figure(data.coord1[i], n);
            const double r = options.residual_space == ResidualSpace::linear
                                 ? model - data.values[i]
                                 : power_db(model) - power_db(data.values[i]);
            out[i] = data.weight_sqrt(i) * r;
        }
        return true;
    };

    const LeastSquaresSummary s =
        minimize_least_squares(residual, {std::log(n0)}, detail::to_lsq_options(options));
    detail::throw_if_exhausted(s, options, "fit_noise");

    FitResult fit;
    const double n = std::exp(s.parameters[0]);
    fit.parameters["n_ratio"] = n;
    fit.standard_errors["n_ratio"] = n * s.standard_errors[0];
    fit.residual_norm = s.residual_norm;
    fit.iterations = s.iterations;
    fit.converged = s.converged;
    return fit;
}

} // namespace kiparc
