#pragma once

#include <cmath>
#include <numbers>

namespace kerrmag::constants {

// CODATA 2018.
inline constexpr double bohr_magneton = 9.2740100783e-24;  // J/T
inline constexpr double hbar = 1.054571817e-34;            // J s
inline constexpr double vacuum_permeability = 1.25663706212e-6;  // N/A^2

inline constexpr double two_pi = 2.0 * std::numbers::pi;

}  // namespace kerrmag::constants

namespace kerrmag {

/// dBm -> mW. Powers are carried in mW everywhere inside the library.
inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
inline double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }

}  // namespace kerrmag
