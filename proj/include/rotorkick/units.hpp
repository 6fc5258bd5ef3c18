#pragma once

#include <numbers>

namespace rotorkick::units {

// Internal convention: times in ps, energies as angular frequencies in
// rad/ps with hbar = 1. Public interfaces use cm^-1 and ps.

inline constexpr double c_cm_per_ps = 0.0299792458;
inline constexpr double c_nm_per_ps = 2.99792458e5;

// Boltzmann constant in the cm^-1 energy convention.
inline constexpr double k_boltzmann_cm1_per_K = 0.695035;

// E[cm^-1] -> omega[rad/ps]
inline constexpr double omega_from_cm1(double e_cm1) {
  return 2.0 * std::numbers::pi * c_cm_per_ps * e_cm1;
}

inline constexpr double cm1_from_omega(double omega_rad_per_ps) {
  return omega_rad_per_ps / (2.0 * std::numbers::pi * c_cm_per_ps);
}

// CGS constants for converting calibrated optical intensities to field
// strengths in the kick-strength integral.
inline constexpr double hbar_erg_s = 1.054571817e-27;
inline constexpr double c_cm_per_s = 2.99792458e10;
inline constexpr double cubic_angstrom_to_cm3 = 1e-24;
inline constexpr double w_per_cm2_to_erg_per_s_cm2 = 1e7;

}  // namespace rotorkick::units
