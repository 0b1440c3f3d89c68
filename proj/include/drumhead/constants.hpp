#pragma once

#include <numbers>

namespace drumhead::constants {

// CODATA 2018
inline constexpr double hbar = 1.054571817e-34;          // J s
inline constexpr double k_boltzmann = 1.380649e-23;      // J/K
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double epsilon_0 = 8.8541878128e-12;    // F/m
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double coulomb_k = 1.0 / (4.0 * std::numbers::pi * epsilon_0);

inline constexpr double mass_be9 = 9.0121831 * atomic_mass_unit;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

}  // namespace drumhead::constants
