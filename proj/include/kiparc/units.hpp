#pragma once

// Unit conventions: every frequency-like quantity inside the library is
// angular (rad/s). File formats and the CLI speak Hz; the conversion is a
// bare factor of 2*pi applied at the boundary, nowhere else.

#include <cmath>
#include <numbers>

namespace kiparc {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// dB floor substituted for log of zero so serialized maps stay finite.
inline constexpr double db_floor = -300.0;

[[nodiscard]] inline constexpr double hz_to_rad(double f_hz) { return two_pi * f_hz; }
[[nodiscard]] inline constexpr double rad_to_hz(double w) { return w / two_pi; }

/// Power ratio to dB, floored at db_floor for non-positive input.
[[nodiscard]] inline double power_db(double linear) {
    if (!(linear > 0.0)) return db_floor;
    return std::max(10.0 * std::log10(linear), db_floor);
}

[[nodiscard]] inline double db_to_power(double db) { return std::pow(10.0, db / 10.0); }

} // namespace kiparc
