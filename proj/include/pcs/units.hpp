#pragma once

#include <numbers>

// Internal rates are angular (rad/s) and times are seconds. These helpers are
// the only place ordinary-frequency values are converted.
namespace pcs::units {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

constexpr double hz(double f) { return two_pi * f; }
constexpr double khz(double f) { return two_pi * 1e3 * f; }
constexpr double mhz(double f) { return two_pi * 1e6 * f; }

constexpr double to_hz(double omega) { return omega / two_pi; }
constexpr double to_khz(double omega) { return omega / (two_pi * 1e3); }

constexpr double us(double t) { return t * 1e-6; }
constexpr double to_us(double t) { return t * 1e6; }

/// Energy-decay rate of a mode with lifetime T1.
constexpr double rate_from_t1(double t1) { return 1.0 / t1; }

}  // namespace pcs::units
