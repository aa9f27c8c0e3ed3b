#pragma once

#include <cstdint>

namespace solarchain::units {

// Ledger energy quantum: 1 unit = 0.01 Wh, so 100000 units = 1 kWh.
inline constexpr std::uint64_t kUnitsPerWh = 100;
inline constexpr std::uint64_t kUnitsPerKwh = 100'000;
inline constexpr double kMegajoulesPerMwh = 3600.0;

constexpr double units_to_wh(std::uint64_t u) { return static_cast<double>(u) / kUnitsPerWh; }
constexpr double units_to_kwh(std::uint64_t u) { return static_cast<double>(u) / kUnitsPerKwh; }
constexpr double units_to_mwh(std::uint64_t u) { return static_cast<double>(u) / 1e8; }

/// Exergy dissipated by consuming `energy_mwh` at a constant quality factor.
constexpr double exergy_mj(double energy_mwh, double quality_factor) {
  return energy_mwh * kMegajoulesPerMwh * quality_factor;
}

}  // namespace solarchain::units
