#pragma once

// Lumped-circuit model of two grounded LC resonators joined by a Josephson
// junction (an rf-SQuID loop closed through the two resonator inductors).
//
// The loop potential in the junction-branch phase φ is
//
//     U(φ) = E_Ls φ²/2 − E_J cos(φ + φ_e),   E_Ls = (Φ₀/2π)² / (L_a + L_b),
//
// with φ_e = 2π Φ_ext/Φ₀. Expanding U about its minimum φ̄ gives the
// coefficients ξ₁..ξ₄. The linearized two-node circuit (junction replaced by
// L_J / cos(φ̄ + φ_e)) is diagonalized into normal modes; their zero-point
// amplitudes across the junction turn ξ₃, ξ₄ into the three-wave and Kerr
// coefficients of the two-mode Hamiltonian.
//
// Conventions: energies and frequencies in rad/ns (ħ = 1), flux in Φ₀.
// χ's are the signed coefficients of the Hamiltonian terms
// χ_ab a†a b†b + χ_aa/2 a†²a² + χ_bb/2 b†²b². The cosine gives ξ₄ < 0 near
// zero flux, so all three come out negative (attractive Kerr).

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "stimosc/errors.hpp"
#include "stimosc/parallel.hpp"
#include "stimosc/units.hpp"

namespace stimosc::circuit {

struct CircuitParams {
    double C_a = 450.0e-15;  // F
    double C_b = 244.3e-15;  // F
    double L_a = 3.77e-9;    // H
    double L_b = 2.45e-9;    // H
    double L_J = 11.0e-9;    // H, junction inductance at zero phase
    double phi_ext = 0.0;    // Φ₀
    // E_J → 0 limit switch: drops the junction entirely (two isolated LCs).
    bool junction_enabled = true;

    static CircuitParams canonical() { return {}; }

    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw std::invalid_argument(std::string(name) + " must be strictly positive");
            }
        };
        positive(C_a, "C_a");
        positive(C_b, "C_b");
        positive(L_a, "L_a");
        positive(L_b, "L_b");
        positive(L_J, "L_J");
        if (!std::isfinite(phi_ext)) throw std::invalid_argument("phi_ext must be finite");
    }

    double josephson_energy() const { return junction_enabled ? units::inductive_energy(L_J) : 0.0; }
    double loop_energy() const { return units::inductive_energy(L_a + L_b); }
    double external_phase() const { return units::two_pi * phi_ext; }

    CircuitParams at_flux(double flux) const {
        CircuitParams p = *this;
        p.phi_ext = flux;
        return p;
    }
};

struct ExpansionCoefficients {
    double phi_bar_ab = 0.0;      // rad
    std::array<double, 4> xi{};   // ξ₁..ξ₄, rad/ns

    double xi1() const { return xi[0]; }
    double xi2() const { return xi[1]; }
    double xi3() const { return xi[2]; }
    double xi4() const { return xi[3]; }
};

struct ModelCoefficients {
    double omega_a = 0.0;  // rad/ns, logical (lower) normal mode
    double omega_b = 0.0;  // rad/ns, blockade (upper) normal mode
    double g = 0.0;        // linear coupling in the normal-mode basis (identically 0)
    double g2 = 0.0;
    double chi_aa = 0.0;
    double chi_bb = 0.0;
    double chi_ab = 0.0;
    double zpf_a = 0.0;  // junction-phase zero-point amplitude of each mode
    double zpf_b = 0.0;

    ExpansionCoefficients expansion;

    // Diagnostics of the local-resonator picture: each LC loaded by the
    // junction inductance, coupled through its off-diagonal inverse inductance.
    double bare_omega_a = 0.0;
    double bare_omega_b = 0.0;
    double g_local = 0.0;
    double junction_inductance_eff = std::numeric_limits<double>::infinity();  // H
};

// Normal-ordering factors taking ξ₃φ̃³ and ξ₄φ̃⁴, with
// φ̃ = z_a(a + a†) + z_b(b + b†), to the coefficients of the RWA terms:
//   φ̃³ ⊃ 3 z_a² z_b (a†² b + a² b†)                         → g₂ = 3 ξ₃ z_a² z_b
//   (a + a†)⁴ ⊃ 6 a†²a²  and  χ/2 a†²a²                    → χ_aa = 12 ξ₄ z_a⁴
//   6 z_a² z_b² (a + a†)²(b + b†)² ⊃ 24 z_a² z_b² a†a b†b  → χ_ab = 24 ξ₄ z_a² z_b²
// Checked against exact diagonalization of the full cubic+quartic Hamiltonian
// in the dynamics tests.
namespace factors {
inline constexpr double three_wave = 3.0;
inline constexpr double self_kerr = 12.0;
inline constexpr double cross_kerr = 24.0;
}  // namespace factors

// U(φ) and its first four derivatives, in rad/ns.
inline std::array<double, 5> potential_derivatives(const CircuitParams& p, double phi) {
    const double el = p.loop_energy();
    const double ej = p.josephson_energy();
    const double x = phi + p.external_phase();
    const double s = std::sin(x);
    const double c = std::cos(x);
    return {el * phi * phi / 2.0 - ej * c, el * phi + ej * s, el + ej * c, -ej * s, -ej * c};
}

inline double potential(const CircuitParams& p, double phi) { return potential_derivatives(p, phi)[0]; }

// Global minimum of the loop potential: grid scan (1001 points per 2π) then
// Newton on U′, falling back to bisection inside the bracketing grid cells.
inline double equilibrium_phase(const CircuitParams& params) {
    params.validate();
    const double el = params.loop_energy();
    const double ej = params.josephson_energy();
    // Every stationary point satisfies |φ| ≤ E_J / E_Ls.
    const double half_span = std::max(units::pi, ej / el + 0.5);
    const int points = static_cast<int>(std::ceil(1000.0 * (2.0 * half_span) / units::two_pi)) + 1;
    const double step = 2.0 * half_span / (points - 1);

    int best = 0;
    double best_u = std::numeric_limits<double>::infinity();
    for (int i = 0; i < points; ++i) {
        const double u = potential(params, -half_span + i * step);
        if (u < best_u) {
            best_u = u;
            best = i;
        }
    }
    double lo = -half_span + std::max(best - 1, 0) * step;
    double hi = -half_span + std::min(best + 1, points - 1) * step;
    double phi = -half_span + best * step;

    constexpr int max_iterations = 200;
    constexpr double tolerance = 1e-12;
    for (int it = 0; it < max_iterations; ++it) {
        const auto d = potential_derivatives(params, phi);
        const double grad = d[1];
        const double curv = d[2];
        if (grad > 0.0) hi = std::min(hi, phi);
        if (grad < 0.0) lo = std::max(lo, phi);
        double next = (curv > 0.0) ? phi - grad / curv : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double change = std::abs(next - phi);
        phi = next;
        if (change < tolerance * 1e-2 || grad == 0.0) {
            return phi;
        }
        if (hi - lo < tolerance * 1e-2) {
            return 0.5 * (lo + hi);
        }
    }
    std::ostringstream msg;
    msg.precision(17);
    msg << "equilibrium_phase: no convergence after " << max_iterations << " iterations, last bracket ["
        << lo << ", " << hi << "]";
    throw NumericalError(msg.str());
}

inline ExpansionCoefficients expansion_coefficients(const CircuitParams& params) {
    ExpansionCoefficients out;
    out.phi_bar_ab = equilibrium_phase(params);
    const auto d = potential_derivatives(params, out.phi_bar_ab);
    out.xi = {d[1], d[2] / 2.0, d[3] / 6.0, d[4] / 24.0};
    return out;
}

inline ModelCoefficients normal_modes(const CircuitParams& params) {
    params.validate();
    ModelCoefficients m;
    m.expansion = expansion_coefficients(params);

    const double junction_cos = std::cos(m.expansion.phi_bar_ab + params.external_phase());
    const double inv_lj = params.junction_enabled ? junction_cos / params.L_J : 0.0;
    m.junction_inductance_eff = inv_lj != 0.0 ? 1.0 / inv_lj : std::numeric_limits<double>::infinity();

    Eigen::Matrix2d k;
    k << 1.0 / params.L_a + inv_lj, -inv_lj, -inv_lj, 1.0 / params.L_b + inv_lj;
    const Eigen::Vector2d inv_sqrt_c(1.0 / std::sqrt(params.C_a), 1.0 / std::sqrt(params.C_b));
    const Eigen::Matrix2d reduced = inv_sqrt_c.asDiagonal() * k * inv_sqrt_c.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> solver(reduced);
    if (solver.info() != Eigen::Success || !(solver.eigenvalues().minCoeff() > 0.0)) {
        throw NumericalError("normal_modes: linearized circuit is not positive definite");
    }

    std::array<double, 2> omega{};
    std::array<double, 2> zpf{};
    for (int mode = 0; mode < 2; ++mode) {
        const double w_si = std::sqrt(solver.eigenvalues()(mode));  // rad/s, ascending
        // Mass-normalized node-flux vector: vᵀ C v = 1.
        const Eigen::Vector2d v = inv_sqrt_c.asDiagonal() * solver.eigenvectors().col(mode);
        const double junction_flux = v(0) - v(1);
        omega[mode] = w_si * 1e-9;
        zpf[mode] = std::abs(units::two_pi / units::flux_quantum * junction_flux *
                             std::sqrt(units::hbar / (2.0 * w_si)));
    }

    m.omega_a = omega[0];
    m.omega_b = omega[1];
    m.zpf_a = zpf[0];
    m.zpf_b = zpf[1];
    const double xi3 = m.expansion.xi3();
    const double xi4 = m.expansion.xi4();
    const double za2 = m.zpf_a * m.zpf_a;
    const double zb2 = m.zpf_b * m.zpf_b;
    m.g2 = factors::three_wave * xi3 * za2 * m.zpf_b;
    m.chi_aa = factors::self_kerr * xi4 * za2 * za2;
    m.chi_bb = factors::self_kerr * xi4 * zb2 * zb2;
    m.chi_ab = factors::cross_kerr * xi4 * za2 * zb2;

    const double wa0 = std::sqrt(k(0, 0) / params.C_a);
    const double wb0 = std::sqrt(k(1, 1) / params.C_b);
    m.bare_omega_a = wa0 * 1e-9;
    m.bare_omega_b = wb0 * 1e-9;
    m.g_local = k(0, 1) / (2.0 * std::sqrt(params.C_a * params.C_b * wa0 * wb0)) * 1e-9;
    return m;
}

struct FluxSweep {
    CircuitParams params;
    std::vector<double> flux;                    // Φ₀
    std::vector<ModelCoefficients> coefficients;
    std::vector<double> dg2_dflux;               // rad/ns per Φ₀
    std::vector<double> d2omega_a_dflux2;        // rad/ns per Φ₀²
    std::vector<double> d2omega_b_dflux2;
};

inline constexpr double derivative_step = 1e-4;  // Φ₀

inline double dg2_dflux(const CircuitParams& params, double flux, double h = derivative_step) {
    return (normal_modes(params.at_flux(flux + h)).g2 - normal_modes(params.at_flux(flux - h)).g2) / (2.0 * h);
}

inline std::array<double, 2> d2omega_dflux2(const CircuitParams& params, double flux, double h = 1e-3) {
    const auto plus = normal_modes(params.at_flux(flux + h));
    const auto mid = normal_modes(params.at_flux(flux));
    const auto minus = normal_modes(params.at_flux(flux - h));
    return {(plus.omega_a - 2.0 * mid.omega_a + minus.omega_a) / (h * h),
            (plus.omega_b - 2.0 * mid.omega_b + minus.omega_b) / (h * h)};
}

inline FluxSweep flux_sweep(const CircuitParams& params, const std::vector<double>& flux_grid, unsigned jobs = 1) {
    params.validate();
    for (double f : flux_grid) {
        if (!(f >= -0.5 && f <= 0.5)) {
            throw std::invalid_argument("flux_sweep: grid point outside [-0.5, 0.5] Phi0");
        }
    }
    FluxSweep out;
    out.params = params;
    out.flux = flux_grid;
    const auto n = flux_grid.size();
    out.coefficients.resize(n);
    out.dg2_dflux.resize(n);
    out.d2omega_a_dflux2.resize(n);
    out.d2omega_b_dflux2.resize(n);
    parallel_for(n, jobs, [&](std::size_t i) {
        const double f = flux_grid[i];
        out.coefficients[i] = normal_modes(params.at_flux(f));
        out.dg2_dflux[i] = dg2_dflux(params, f);
        const auto d2 = d2omega_dflux2(params, f);
        out.d2omega_a_dflux2[i] = d2[0];
        out.d2omega_b_dflux2[i] = d2[1];
    });
    return out;
}

inline std::vector<double> uniform_grid(double lo, double hi, std::size_t points) {
    std::vector<double> grid(points);
    for (std::size_t i = 0; i < points; ++i) {
        grid[i] = points == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    }
    return grid;
}

}  // namespace stimosc::circuit
