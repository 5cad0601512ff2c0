#pragma once

// =============================================================================
// Scattering engine: input-output response of the two-mode converter.
//
// Conventions. Mode b / ports 2,4 carry the signal, mode a / ports 1,3 the
// idler. In the rotating frame the signal sits at +delta and the idler at
// -delta; signal-frequency gains are therefore evaluated at +delta and
// idler-frequency gains at -delta. Free-propagation phases are fixed to
// unity (common reference time), a global rotation that align_quadratures
// removes anyway.
// =============================================================================

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "kiparc/frames.hpp"
#include "kiparc/model.hpp"
#include "kiparc/units.hpp"

namespace kiparc {

namespace detail {

struct Denominators {
    Complex d_s;
    Complex d_i;
};

/// Both gain denominators at the given probe detuning, guarded against the
/// parametric-oscillation pole.
inline Denominators gain_denominators(const ScatteringParams& sp, double delta) {
    const Complex i{0.0, 1.0};
    const double xi2_4 = std::norm(sp.xi) / 4.0;
    const Complex a_plus = i * (delta + sp.delta_a) - sp.kappa_a;
    const Complex a_minus = i * (delta - sp.delta_a) - sp.kappa_a;
    const Complex b_plus = i * (delta + sp.delta_b) - sp.kappa_b;
    const Complex b_minus = i * (delta - sp.delta_b) - sp.kappa_b;
    const Denominators d{a_plus * b_minus - xi2_4, a_minus * b_plus - xi2_4};
    const double kappa_sum = sp.kappa_a + sp.kappa_b;
    const double guard = 1e-12 * kappa_sum * kappa_sum;
    if (std::abs(d.d_s) <= guard || std::abs(d.d_i) <= guard)
        throw PoleError("operating point at/above the parametric-oscillation threshold");
    return d;
}

} // namespace detail

// -----------------------------------------------------------------------------
// Amplitude and power gains
// -----------------------------------------------------------------------------

/// The four amplitude gains at probe detuning `delta`:
///   g_ss = kappa_b [i(delta+delta_a) - kappa_a] / D_s
///   g_is = i sqrt(kappa_a kappa_b) xi / (2 D_s)
///   g_ii = kappa_a [i(delta+delta_b) - kappa_b] / D_i
///   g_si = i sqrt(kappa_a kappa_b) xi / (2 D_i)
/// with D_s/i = [i(delta +- delta_a) - kappa_a][i(delta -+ delta_b) - kappa_b]
///              - |xi|^2/4.
[[nodiscard]] inline GainSet amplitude_gains(const ScatteringParams& sp, double delta) {
    detail::require(std::isfinite(delta), "delta must be finite");
    const auto [d_s, d_i] = detail::gain_denominators(sp, delta);
    const Complex i{0.0, 1.0};
    const double root_kk = std::sqrt(sp.kappa_a * sp.kappa_b);
    const Complex conv = i * root_kk * sp.xi * 0.5;
    return {sp.kappa_b * (i * (delta + sp.delta_a) - sp.kappa_a) / d_s,
            conv / d_i,
            sp.kappa_a * (i * (delta + sp.delta_b) - sp.kappa_b) / d_i,
            conv / d_s,
            d_s,
            d_i};
}

/// Measured power gains in dB: direct gain |g_ss|^2 and conversion gain
/// |g_si|^2, floored at -300 dB.
[[nodiscard]] inline std::pair<double, double> power_gains_db(const GainSet& gs) {
    return {power_db(std::norm(gs.g_ss())), power_db(std::norm(gs.g_si()))};
}

// -----------------------------------------------------------------------------
// Port outputs and quadratures
// -----------------------------------------------------------------------------

/// Output amplitudes at the four ports: idler frequency at ports 1/3, signal
/// frequency at ports 2/4.
struct PortOutputs {
    Complex out1;
    Complex out2;
    Complex out3;
    Complex out4;
};

/// Port outputs for a coherent drive (alpha into port 1 at the idler
/// frequency, beta into port 2 at the signal frequency, vacuum elsewhere):
///   out3 = g_ii(-delta) alpha + g_si(-delta) beta*        out1 = alpha + out3
///   out4 = g_ss(+delta) beta  + g_is(+delta) alpha*       out2 = beta  + out4
/// The port-pair structure out1 - in1 = out3 - in3 (and 2/4 alike) is exact.
[[nodiscard]] inline PortOutputs output_fields(const ScatteringParams& sp, double delta,
                                               const DriveState& drive) {
    const GainSet signal_rows = amplitude_gains(sp, delta);
    const GainSet idler_rows = amplitude_gains(sp, -delta);
    const Complex out3 =
        idler_rows.g_ii() * drive.alpha + idler_rows.g_si() * std::conj(drive.beta);
    const Complex out4 =
        signal_rows.g_ss() * drive.beta + signal_rows.g_is() * std::conj(drive.alpha);
    return {drive.alpha + out3, drive.beta + out4, out3, out4};
}

/// Quadratures of the transmitted outputs (ports 3 and 4).
[[nodiscard]] inline QuadratureSample quadratures(const ScatteringParams& sp, double delta,
                                                  const DriveState& drive) {
    const PortOutputs out = output_fields(sp, delta, drive);
    return QuadratureSample::from_outputs(out.out4, out.out3);
}

// -----------------------------------------------------------------------------
// Phase sweeps and alignment
// -----------------------------------------------------------------------------

/// Quadrature samples keyed by the swept input signal phase.
struct QuadratureSweep {
    std::vector<double> phases;  // rad
    std::vector<QuadratureSample> samples;
};

/// Sweep of the input signal phase over `phases` with unit signal amplitude
/// (optionally scaled) and no idler input.
[[nodiscard]] inline QuadratureSweep phase_sweep(const ScatteringParams& sp, double delta,
                                                 std::span<const double> phases,
                                                 double signal_amplitude = 1.0) {
    detail::require(signal_amplitude > 0.0, "signal amplitude must be > 0");
    QuadratureSweep sweep;
    sweep.phases.assign(phases.begin(), phases.end());
    sweep.samples.reserve(phases.size());
    for (double phi : phases) {
        const DriveState drive{Complex{0.0, 0.0},
                               std::polar(signal_amplitude, phi)};
        sweep.samples.push_back(quadratures(sp, delta, drive));
    }
    return sweep;
}

/// Rotate and rescale each output channel by a constant so that its sample
/// at phase -pi lands on (-1, 0). After alignment a noiseless sweep has
/// signal locus e^{i phi} and idler locus e^{-i phi}.
[[nodiscard]] inline QuadratureSweep align_quadratures(const QuadratureSweep& sweep) {
    detail::require(sweep.phases.size() == sweep.samples.size(),
                    "sweep phases/samples size mismatch");
    std::size_t ref = sweep.phases.size();
    for (std::size_t i = 0; i < sweep.phases.size(); ++i) {
        if (std::abs(sweep.phases[i] + std::numbers::pi) < 1e-9) {
            ref = i;
            break;
        }
    }
    detail::require(ref != sweep.phases.size(), "sweep must contain the phase -pi");

    const Complex ref_s = sweep.samples[ref].signal();
    const Complex ref_i = sweep.samples[ref].idler();
    if (std::abs(ref_s) == 0.0 || std::abs(ref_i) == 0.0)
        throw DegenerateInputError("cannot align a zero-amplitude output channel");

    QuadratureSweep aligned;
    aligned.phases = sweep.phases;
    aligned.samples.reserve(sweep.samples.size());
    for (const QuadratureSample& q : sweep.samples) {
        aligned.samples.push_back(QuadratureSample::from_outputs(-q.signal() / ref_s,
                                                                 -q.idler() / ref_i));
    }
    return aligned;
}

// -----------------------------------------------------------------------------
// Extinction and interference
// -----------------------------------------------------------------------------

enum class ExtinctionTarget { signal, idler };

/// Drive ratio beta/alpha* that nulls the chosen output exactly:
///   signal: -i sqrt(kappa_a/kappa_b) xi / (2 [i(delta+delta_a) - kappa_a])
///   idler:  -i sqrt(kappa_a/kappa_b) 2 [i(delta-delta_b) - kappa_b] / xi*
[[nodiscard]] inline Complex extinction_ratio(const ScatteringParams& sp, double delta,
                                              ExtinctionTarget target) {
    detail::gain_denominators(sp, delta);  // pole guard
    const Complex i{0.0, 1.0};
    const double root = std::sqrt(sp.kappa_a / sp.kappa_b);
    if (target == ExtinctionTarget::signal)
        return -i * root * sp.xi / (2.0 * (i * (delta + sp.delta_a) - sp.kappa_a));
    if (sp.xi == Complex{0.0, 0.0})
        throw DegenerateInputError("idler extinction requires a nonzero mixing rate");
    return -i * root * 2.0 * (i * (delta - sp.delta_b) - sp.kappa_b) / std::conj(sp.xi);
}

/// Signal/idler gains versus swept signal phase, both referred to the signal
/// input power.
struct FringeResult {
    std::vector<double> phases;  // rad
    std::vector<double> g_s_db;
    std::vector<double> g_i_db;
};

/// Two-tone interference fringe: the idler input alpha is held fixed while
/// beta = beta_mag e^{i phi} sweeps over `phases`. Gains are |out4|^2/|beta|^2
/// and |out3|^2/|beta|^2 in dB.
[[nodiscard]] inline FringeResult interference_fringe(const ScatteringParams& sp, double delta,
                                                      Complex alpha, double beta_mag,
                                                      std::span<const double> phases) {
    detail::require(std::isfinite(beta_mag) && beta_mag > 0.0, "beta_mag must be > 0");
    const double beta_power = beta_mag * beta_mag;
    FringeResult fringe;
    fringe.phases.assign(phases.begin(), phases.end());
    fringe.g_s_db.reserve(phases.size());
    fringe.g_i_db.reserve(phases.size());
    for (double phi : phases) {
        const DriveState drive{alpha, std::polar(beta_mag, phi)};
        const PortOutputs out = output_fields(sp, delta, drive);
        fringe.g_s_db.push_back(power_db(std::norm(out.out4) / beta_power));
        fringe.g_i_db.push_back(power_db(std::norm(out.out3) / beta_power));
    }
    return fringe;
}

// -----------------------------------------------------------------------------
// Four-port Bogoliubov scattering matrix
// -----------------------------------------------------------------------------

/// 8x8 complex scattering transform on the stacked vector
///   (in1, in3, in2+, in4+, in2, in4, in1+, in3+)
/// producing the same-ordered output stack. Ports 1/3 entries live at the
/// idler frequency (-delta), ports 2/4 at the signal frequency (+delta);
/// daggered entries are creation operators of the opposite-frequency modes.
class BogoliubovMatrix {
public:
    static constexpr std::size_t dim = 8;

    [[nodiscard]] Complex at(std::size_t row, std::size_t col) const {
        return entries_[row * dim + col];
    }
    Complex& at(std::size_t row, std::size_t col) { return entries_[row * dim + col]; }

    /// Canonical metric: +1 on annihilation rows, -1 on creation rows.
    [[nodiscard]] static constexpr std::array<double, dim> eta() {
        return {1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0};
    }

    /// Max-norm of M eta M^dagger - eta; zero for an exact Bogoliubov map.
    [[nodiscard]] double canonical_form_deviation() const {
        double worst = 0.0;
        const auto metric = eta();
        for (std::size_t r = 0; r < dim; ++r) {
            for (std::size_t c = 0; c < dim; ++c) {
                Complex acc{0.0, 0.0};
                for (std::size_t k = 0; k < dim; ++k)
                    acc += at(r, k) * metric[k] * std::conj(at(c, k));
                if (r == c) acc -= metric[r];
                worst = std::max(worst, std::abs(acc));
            }
        }
        return worst;
    }

    [[nodiscard]] std::array<Complex, dim> apply(const std::array<Complex, dim>& in) const {
        std::array<Complex, dim> out{};
        for (std::size_t r = 0; r < dim; ++r)
            for (std::size_t c = 0; c < dim; ++c) out[r] += at(r, c) * in[c];
        return out;
    }

private:
    std::array<Complex, dim * dim> entries_{};
};

/// Full four-port scattering matrix at the (+delta, -delta) frequency pair.
[[nodiscard]] inline BogoliubovMatrix bogoliubov_matrix(const ScatteringParams& sp,
                                                        double delta) {
    const GainSet signal_rows = amplitude_gains(sp, delta);    // ports 2/4 at +delta
    const GainSet idler_rows = amplitude_gains(sp, -delta);    // ports 1/3 at -delta
    const Complex g_ii = idler_rows.g_ii();
    const Complex g_si = idler_rows.g_si();
    const Complex g_ss = signal_rows.g_ss();
    const Complex g_is = signal_rows.g_is();

    BogoliubovMatrix m;
    const Complex one{1.0, 0.0};
    // idler-frequency annihilation rows: out_j = in_j + g_ii (in1+in3) + g_si (in2+in4)+
    for (std::size_t r : {0u, 1u}) {
        m.at(r, 0) = g_ii + (r == 0 ? one : Complex{});
        m.at(r, 1) = g_ii + (r == 1 ? one : Complex{});
        m.at(r, 2) = g_si;
        m.at(r, 3) = g_si;
    }
    // signal-frequency creation rows: conjugates of the +delta relations
    for (std::size_t r : {2u, 3u}) {
        m.at(r, 0) = std::conj(g_is);
        m.at(r, 1) = std::conj(g_is);
        m.at(r, 2) = std::conj(g_ss) + (r == 2 ? one : Complex{});
        m.at(r, 3) = std::conj(g_ss) + (r == 3 ? one : Complex{});
    }
    // signal-frequency annihilation rows: out_j = in_j + g_ss (in2+in4) + g_is (in1+in3)+
    for (std::size_t r : {4u, 5u}) {
        m.at(r, 4) = g_ss + (r == 4 ? one : Complex{});
        m.at(r, 5) = g_ss + (r == 5 ? one : Complex{});
        m.at(r, 6) = g_is;
        m.at(r, 7) = g_is;
    }
    // idler-frequency creation rows: conjugates of the -delta relations
    for (std::size_t r : {6u, 7u}) {
        m.at(r, 4) = std::conj(g_si);
        m.at(r, 5) = std::conj(g_si);
        m.at(r, 6) = std::conj(g_ii) + (r == 6 ? one : Complex{});
        m.at(r, 7) = std::conj(g_ii) + (r == 7 ? one : Complex{});
    }
    return m;
}

// -----------------------------------------------------------------------------
// Two-dimensional gain map
// -----------------------------------------------------------------------------

/// Signal and idler power gains on the (omega_s - omega_b, omega_i - omega_a)
/// grid, in dB, row-major over (x, y). Cells on a pole are masked rather than
/// failing the whole map.
struct GainMap {
    std::vector<double> x;  // rad/s offsets of the signal from mode b
    std::vector<double> y;  // rad/s offsets of the idler from mode a
    std::vector<double> g_s_db;
    std::vector<double> g_i_db;
    std::vector<std::uint8_t> masked;

    [[nodiscard]] std::size_t index(std::size_t ix, std::size_t iy) const {
        return ix * y.size() + iy;
    }
};

[[nodiscard]] inline GainMap gain_map(const DeviceModes& modes, std::span<const double> x_grid,
                                      std::span<const double> y_grid) {
    GainMap map;
    map.x.assign(x_grid.begin(), x_grid.end());
    map.y.assign(y_grid.begin(), y_grid.end());
    const std::size_t n = x_grid.size() * y_grid.size();
    map.g_s_db.assign(n, db_floor);
    map.g_i_db.assign(n, db_floor);
    map.masked.assign(n, 0);
    for (std::size_t ix = 0; ix < x_grid.size(); ++ix) {
        for (std::size_t iy = 0; iy < y_grid.size(); ++iy) {
            const std::size_t cell = map.index(ix, iy);
            const FramePoint fp = map_axes_to_frame(modes, x_grid[ix], y_grid[iy]);
            try {
                const GainSet signal_rows = amplitude_gains(fp.params, fp.delta);
                const GainSet idler_rows = amplitude_gains(fp.params, -fp.delta);
                map.g_s_db[cell] = power_db(std::norm(signal_rows.g_ss()));
                map.g_i_db[cell] = power_db(std::norm(idler_rows.g_si()));
            } catch (const PoleError&) {
                map.masked[cell] = 1;
            }
        }
    }
    return map;
}

// -----------------------------------------------------------------------------
// Noise figure
// -----------------------------------------------------------------------------

/// Noise-figure forward model NF(G) = (1 + (G-1) n_ratio) / G for linear
/// power gain G >= 1 and device-to-system noise ratio n_ratio >= 0.
[[nodiscard]] inline double noise_figure(double gain, double n_ratio) {
    detail::require(std::isfinite(gain) && gain >= 1.0, "gain must be >= 1");
    detail::require(std::isfinite(n_ratio) && n_ratio >= 0.0, "n_ratio must be >= 0");
    return (1.0 + (gain - 1.0) * n_ratio) / gain;
}

} // namespace kiparc
