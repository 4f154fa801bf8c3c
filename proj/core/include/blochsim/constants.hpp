#ifndef BLOCHSIM_CONSTANTS_HPP
#define BLOCHSIM_CONSTANTS_HPP

// Physical constants (CODATA 2018) and unit helpers.
//
// Unit convention used throughout the library: every energy is stored as an
// angular frequency (energy divided by hbar, rad/s).  Times are seconds
// internally; the CLI converts to milliseconds at the boundary.

namespace blochsim {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

inline constexpr double kHbar = 1.054571817e-34;       // J s
inline constexpr double kPlanck = 6.62607015e-34;      // J s
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;  // kg

// Rb-87 (the species used for all defaults)
inline constexpr double kRb87Mass = 86.909180527 * kAtomicMassUnit;  // kg

// Handy scales
inline constexpr double kNm = 1e-9;
inline constexpr double kUm = 1e-6;
inline constexpr double kMs = 1e-3;

// Linear frequency in Hz -> angular frequency in rad/s
constexpr double hz_to_rad(double f) { return kTwoPi * f; }
constexpr double rad_to_hz(double w) { return w / kTwoPi; }

}  // namespace blochsim

#endif
