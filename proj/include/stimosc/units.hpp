#pragma once

// Physical constants and unit conventions.
//
// Internally every angular frequency is in rad/ns and every time in ns.
// Files and the CLI use GHz (= angular / 2π), MHz, kHz and flux in units of Φ₀.

#include <numbers>

namespace stimosc::units {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr double hbar = 1.054571817e-34;        // J·s
inline constexpr double flux_quantum = 2.067833848e-15; // Wb (h / 2e)
inline constexpr double reduced_flux_quantum = flux_quantum / two_pi;

inline constexpr double femto = 1e-15;
inline constexpr double nano = 1e-9;

// Energy (J) expressed as an angular frequency in rad/ns.
constexpr double energy_to_rad_per_ns(double joules) { return joules / hbar * 1e-9; }

// Inductive energy (Φ₀/2π)²/L as angular frequency in rad/ns.
constexpr double inductive_energy(double inductance_henry) {
    return energy_to_rad_per_ns(reduced_flux_quantum * reduced_flux_quantum / inductance_henry);
}

constexpr double ghz_to_rad(double ghz) { return two_pi * ghz; }
constexpr double mhz_to_rad(double mhz) { return two_pi * mhz * 1e-3; }
constexpr double khz_to_rad(double khz) { return two_pi * khz * 1e-6; }
constexpr double rad_to_ghz(double w) { return w / two_pi; }
constexpr double rad_to_mhz(double w) { return w / two_pi * 1e3; }
constexpr double rad_to_khz(double w) { return w / two_pi * 1e6; }

}  // namespace stimosc::units
