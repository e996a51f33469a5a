#pragma once

#include <numbers>

namespace squidstore {

// Internal units: energy in ueV, time in ps, capacitance in aF.
struct PhysicalConstants {
  static constexpr double e = 1.602176634e-19;           // C
  static constexpr double hbar = 1.054571817e-34;        // J s
  static constexpr double Phi0 = 2.067833848e-15;        // Wb, h / 2e
  static constexpr double eV_per_J = 1.0 / e;
  static constexpr double hbar_ueV_ps = 658.2119569;     // ueV ps

  // e^2 / (1 aF) expressed in ueV.
  static constexpr double e2_over_aF_ueV = e * 1e18 * 1e6;
  // 1 ueV in joules.
  static constexpr double J_per_ueV = e * 1e-6;
};

inline constexpr double kHbar = PhysicalConstants::hbar_ueV_ps;
inline constexpr double kPi = std::numbers::pi;

}  // namespace squidstore
