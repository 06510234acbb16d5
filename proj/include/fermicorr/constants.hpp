#pragma once

#include <numbers>

namespace fermicorr {

// (2*pi)^3, the momentum-space cell volume entering every coupling
// normalization.  8*pi^3 rounds to the same double as cubing 2*pi.
inline constexpr double kTwoPiCubed =
    8.0 * std::numbers::pi * std::numbers::pi * std::numbers::pi;

inline constexpr double kPi = std::numbers::pi;

}  // namespace fermicorr
