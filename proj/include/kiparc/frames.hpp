#pragma once

// Conversions between the lab frame and the frame rotating at half the pump
// frequency. In the rotating frame the operating point is fully described by
// the probe detuning delta = omega_s - omega_p/2 together with the mode
// detunings delta_a = omega_a - omega_p/2 and delta_b = omega_b - omega_p/2.

#include <utility>

#include "kiparc/model.hpp"

namespace kiparc {

/// One rotating-frame operating point: probe detuning plus filled-in params.
struct FramePoint {
    double delta;  // rad/s
    ScatteringParams params;
};

/// Rotating-frame point for a probe at omega_s with the pump at omega_p.
/// Couplings and the mixing rate are copied from the device template.
[[nodiscard]] inline FramePoint lab_to_frame(const DeviceModes& modes,
                                             double omega_s, double omega_p) {
    detail::require(omega_s > 0.0 && omega_p > 0.0,
                    "lab_to_frame requires positive omega_s and omega_p");
    const double half_pump = 0.5 * omega_p;
    return {omega_s - half_pump,
            modes.params.with_detunings(modes.omega_a - half_pump,
                                        modes.omega_b - half_pump)};
}

/// Rotating-frame point from gain-map axes: x = omega_s - omega_b is the
/// signal offset from mode b, y = omega_i - omega_a the idler offset from
/// mode a. The pump follows as omega_p = omega_a + omega_b + x + y.
[[nodiscard]] inline FramePoint map_axes_to_frame(const DeviceModes& modes,
                                                  double x, double y) {
    detail::require(std::isfinite(x) && std::isfinite(y),
                    "map axes must be finite");
    const double omega_p = modes.omega_a + modes.omega_b + x + y;
    const double omega_s = modes.omega_b + x;
    return lab_to_frame(modes, omega_s, omega_p);
}

/// Inverse of map_axes_to_frame: recovers (x, y) from a frame point.
[[nodiscard]] inline std::pair<double, double> frame_to_axes(const FramePoint& fp) {
    return {fp.delta - fp.params.delta_b, -(fp.delta + fp.params.delta_a)};
}

} // namespace kiparc
