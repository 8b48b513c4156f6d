#pragma once

#include <numbers>

namespace spintorque::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Boltzmann constant [J/K] (exact, SI 2019).
inline constexpr double k_boltzmann = 1.380649e-23;

/// Reduced Planck constant [J s].
inline constexpr double hbar = 1.054571817e-34;

}  // namespace spintorque::constants
