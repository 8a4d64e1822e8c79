#include <catch_amalgamated.hpp>

#include "stimosc/circuit_model.hpp"

#include <cmath>
#include <random>

using namespace stimosc;
using circuit::CircuitParams;
using Catch::Approx;

namespace {

// Independent equilibrium oracle: very dense scan of U followed by Newton
// with finite-difference derivatives, in long double.
long double oracle_potential(const CircuitParams& p, long double phi) {
    const long double el = p.loop_energy();
    const long double ej = p.josephson_energy();
    return el * phi * phi / 2.0L - ej * std::cos(phi + static_cast<long double>(p.external_phase()));
}

double oracle_equilibrium(const CircuitParams& p) {
    const int n = 200001;
    long double best = 0.0L;
    long double best_u = 1e300L;
    for (int i = 0; i < n; ++i) {
        const long double phi = -4.0L + 8.0L * i / (n - 1);
        const long double u = oracle_potential(p, phi);
        if (u < best_u) {
            best_u = u;
            best = phi;
        }
    }
    const long double h = 1e-5L;
    long double phi = best;
    for (int it = 0; it < 50; ++it) {
        const long double up = oracle_potential(p, phi + h);
        const long double um = oracle_potential(p, phi - h);
        const long double u0 = oracle_potential(p, phi);
        const long double grad = (up - um) / (2 * h);
        const long double curv = (up - 2 * u0 + um) / (h * h);
        phi -= grad / curv;
    }
    return static_cast<double>(phi);
}

// n-th derivative of U at phi from 5-point central stencils with one
// Richardson step (h, h/2), long double.
long double stencil(const CircuitParams& p, long double x, int order, long double h) {
    auto f = [&](long double t) { return oracle_potential(p, x + t); };
    switch (order) {
        case 2:
            return (-f(2 * h) + 16 * f(h) - 30 * f(0) + 16 * f(-h) - f(-2 * h)) / (12 * h * h);
        case 3:
            return (f(2 * h) - 2 * f(h) + 2 * f(-h) - f(-2 * h)) / (2 * h * h * h);
        case 4:
            return (f(2 * h) - 4 * f(h) + 6 * f(0) - 4 * f(-h) + f(-2 * h)) / (h * h * h * h);
        default:
            return 0;
    }
}

double richardson_derivative(const CircuitParams& p, double x, int order) {
    const long double h = 0.02L;
    const long double coarse = stencil(p, x, order, h);
    const long double fine = stencil(p, x, order, h / 2);
    return static_cast<double>((4 * fine - coarse) / 3);
}

// Closed-form generalized eigenvalues of the 2x2 problem det(K − ω²C) = 0.
std::array<double, 2> oracle_frequencies_ghz(const CircuitParams& p) {
    const double phi = oracle_equilibrium(p);
    const double inv_lj = p.junction_enabled ? std::cos(phi + p.external_phase()) / p.L_J : 0.0;
    const double k11 = 1 / p.L_a + inv_lj, k22 = 1 / p.L_b + inv_lj, k12 = -inv_lj;
    const double a = p.C_a * p.C_b;
    const double b = -(k11 * p.C_b + k22 * p.C_a);
    const double c = k11 * k22 - k12 * k12;
    const double disc = std::sqrt(b * b - 4 * a * c);
    const double lo = (-b - disc) / (2 * a);
    const double hi = (-b + disc) / (2 * a);
    return {std::sqrt(lo) / units::two_pi * 1e-9, std::sqrt(hi) / units::two_pi * 1e-9};
}

}  // namespace

TEST_CASE("equilibrium phase at zero flux is the symmetric minimum", "[circuit]") {
    CHECK(circuit::equilibrium_phase(CircuitParams::canonical()) == Approx(0.0).margin(1e-14));
}

TEST_CASE("equilibrium phase at half flux quantum", "[circuit]") {
    const auto p = CircuitParams::canonical().at_flux(0.5);
    CHECK(p.loop_energy() > p.josephson_energy());  // L_s / L_J = 0.565 < 1
    const double phi = circuit::equilibrium_phase(p);
    CHECK(phi == Approx(oracle_equilibrium(p)).margin(1e-10));
    CHECK(phi == Approx(0.0).margin(1e-10));
}

TEST_CASE("equilibrium phase at a quarter flux quantum solves the stationarity condition", "[circuit]") {
    const auto p = CircuitParams::canonical().at_flux(0.25);
    const double phi = circuit::equilibrium_phase(p);
    CHECK(std::abs(phi) > 0.1);
    CHECK(phi == Approx(oracle_equilibrium(p)).margin(1e-10));
    // E_Ls φ = −E_J sin(φ + π/2), scaled by E_J.
    const double residual = p.loop_energy() * phi + p.josephson_energy() * std::sin(phi + units::pi / 2);
    CHECK(std::abs(residual) / p.josephson_energy() < 1e-10);
}

TEST_CASE("expansion coefficients at zero flux", "[circuit]") {
    const auto p = CircuitParams::canonical();
    const auto x = circuit::expansion_coefficients(p);
    CHECK(x.xi3() == Approx(0.0).margin(1e-14));
    CHECK(x.xi2() == Approx((p.josephson_energy() + p.loop_energy()) / 2.0).epsilon(1e-13));
    CHECK(x.xi4() == Approx(-p.josephson_energy() / 24.0).epsilon(1e-13));
}

TEST_CASE("expansion coefficients match finite-difference stencils of U", "[circuit]") {
    for (double flux : {0.1, -0.1, 0.23, 0.37}) {
        const auto p = CircuitParams::canonical().at_flux(flux);
        const auto x = circuit::expansion_coefficients(p);
        INFO("flux " << flux);
        CHECK(std::abs(x.xi1()) < 1e-12 * std::abs(x.xi2()));
        CHECK(x.xi2() == Approx(richardson_derivative(p, x.phi_bar_ab, 2) / 2.0).epsilon(1e-6));
        CHECK(x.xi3() == Approx(richardson_derivative(p, x.phi_bar_ab, 3) / 6.0).epsilon(1e-6));
        CHECK(x.xi4() == Approx(richardson_derivative(p, x.phi_bar_ab, 4) / 24.0).epsilon(1e-6));
    }
}

TEST_CASE("normal modes of the canonical device", "[circuit]") {
    const auto p = CircuitParams::canonical();
    const auto m = circuit::normal_modes(p);
    const auto oracle = oracle_frequencies_ghz(p);
    CHECK(units::rad_to_ghz(m.omega_a) == Approx(oracle[0]).epsilon(1e-12));
    CHECK(units::rad_to_ghz(m.omega_b) == Approx(oracle[1]).epsilon(1e-12));
    CHECK(m.omega_b > m.omega_a);
    CHECK(m.g2 == 0.0);
    CHECK(m.g == 0.0);
    // Logical mode within 2% of 4.284 GHz. (The blockade mode comes out at
    // 7.294 GHz; see the acceptance report.)
    CHECK(units::rad_to_ghz(m.omega_a) == Approx(4.284).epsilon(0.02));

    // Frozen values of this model, computed with an independent dense
    // generalized-eigensolver script.
    CHECK(units::rad_to_ghz(m.omega_a) == Approx(4.31198826).epsilon(1e-7));
    CHECK(units::rad_to_ghz(m.omega_b) == Approx(7.29392372).epsilon(1e-7));
    CHECK(m.zpf_a == Approx(0.1399743307).epsilon(1e-7));
    CHECK(m.zpf_b == Approx(0.2355953983).epsilon(1e-7));
    CHECK(units::rad_to_mhz(m.chi_aa) == Approx(-2.852242401).epsilon(1e-6));
    CHECK(units::rad_to_mhz(m.chi_bb) == Approx(-22.89075130).epsilon(1e-6));
    CHECK(units::rad_to_mhz(m.chi_ab) == Approx(-16.16044200).epsilon(1e-6));
    // Single-junction perturbative structure: χ_ab² = 4 χ_aa χ_bb.
    CHECK(m.chi_ab * m.chi_ab == Approx(4 * m.chi_aa * m.chi_bb).epsilon(1e-12));
}

TEST_CASE("three-wave coupling at small flux", "[circuit]") {
    const auto m = circuit::normal_modes(CircuitParams::canonical().at_flux(0.01));
    CHECK(units::rad_to_mhz(m.g2) == Approx(-1.377154355).epsilon(1e-6));
}

TEST_CASE("isolated LC limit", "[circuit]") {
    auto p = CircuitParams::canonical();
    p.junction_enabled = false;
    const auto m = circuit::normal_modes(p);
    const double lc_a = 1.0 / (units::two_pi * std::sqrt(p.L_a * p.C_a)) * 1e-9;
    const double lc_b = 1.0 / (units::two_pi * std::sqrt(p.L_b * p.C_b)) * 1e-9;
    CHECK(units::rad_to_ghz(m.omega_a) == Approx(lc_a).epsilon(1e-12));
    CHECK(units::rad_to_ghz(m.omega_b) == Approx(lc_b).epsilon(1e-12));
    CHECK(lc_a == Approx(3.864).epsilon(1e-3));
    CHECK(m.g2 == 0.0);
    CHECK(m.chi_aa == 0.0);
}

TEST_CASE("invalid circuit parameters are rejected", "[circuit]") {
    auto p = CircuitParams::canonical();
    p.C_a = -1e-15;
    CHECK_THROWS_AS(circuit::normal_modes(p), std::invalid_argument);
    p = CircuitParams::canonical();
    p.L_J = 0.0;
    CHECK_THROWS_AS(circuit::equilibrium_phase(p), std::invalid_argument);
}

TEST_CASE("flux sweep symmetries", "[circuit][property]") {
    const auto grid = circuit::uniform_grid(-0.5, 0.5, 101);
    const auto sweep = circuit::flux_sweep(CircuitParams::canonical(), grid);
    const auto n = grid.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& m = sweep.coefficients[i];
        const auto& mirror = sweep.coefficients[n - 1 - i];
        INFO("flux " << grid[i]);
        CHECK(std::abs(m.omega_a - mirror.omega_a) <= 1e-10 * m.omega_a);
        CHECK(std::abs(m.omega_b - mirror.omega_b) <= 1e-10 * m.omega_b);
        CHECK(std::abs(m.g2 + mirror.g2) <= 1e-10 * std::max(std::abs(m.g2), 1e-12));
        CHECK(std::abs(m.chi_aa - mirror.chi_aa) <= 1e-10 * std::abs(m.chi_aa));
        CHECK(std::abs(m.chi_bb - mirror.chi_bb) <= 1e-10 * std::abs(m.chi_bb));
        CHECK(std::abs(m.chi_ab - mirror.chi_ab) <= 1e-10 * std::abs(m.chi_ab));
        CHECK(std::abs(m.expansion.xi1()) < 1e-12 * std::abs(m.expansion.xi2()));
    }
    // Continuity: each adjacent jump is bounded by twice the local slope
    // (taken at the interval midpoint) times the grid step.
    const double step = grid[1] - grid[0];
    const auto p = CircuitParams::canonical();
    for (std::size_t i = 1; i < n; ++i) {
        const double mid = 0.5 * (grid[i] + grid[i - 1]);
        const double h = 1e-5;
        const auto up = circuit::normal_modes(p.at_flux(std::min(mid + h, 0.5)));
        const auto dn = circuit::normal_modes(p.at_flux(std::max(mid - h, -0.5)));
        const double slope_a = std::abs(up.omega_a - dn.omega_a) / (2 * h);
        const double slope_b = std::abs(up.omega_b - dn.omega_b) / (2 * h);
        CHECK(std::abs(sweep.coefficients[i].omega_a - sweep.coefficients[i - 1].omega_a) <
              2.0 * step * slope_a + 1e-9);
        CHECK(std::abs(sweep.coefficients[i].omega_b - sweep.coefficients[i - 1].omega_b) <
              2.0 * step * slope_b + 1e-9);
    }
    // Linear dispersion of g2 at the sweet spot.
    CHECK(std::abs(sweep.dg2_dflux[n / 2]) > units::mhz_to_rad(10.0));
    CHECK(sweep.d2omega_a_dflux2[n / 2] < 0.0);
}

TEST_CASE("random circuits: stationary minimum and flux parity", "[circuit][property]") {
    std::mt19937 rng(20181023);
    std::uniform_real_distribution<double> cap(150e-15, 600e-15);
    std::uniform_real_distribution<double> ind(1e-9, 6e-9);
    std::uniform_real_distribution<double> lj(8e-9, 30e-9);
    std::uniform_real_distribution<double> flux(0.0, 0.5);
    for (int trial = 0; trial < 40; ++trial) {
        CircuitParams p;
        p.C_a = cap(rng);
        p.C_b = cap(rng);
        p.L_a = ind(rng);
        p.L_b = ind(rng);
        p.L_J = lj(rng);
        if (p.L_a + p.L_b >= p.L_J) continue;  // single-well regime only
        const double f = flux(rng);
        const auto plus = circuit::normal_modes(p.at_flux(f));
        const auto minus = circuit::normal_modes(p.at_flux(-f));
        INFO("trial " << trial);
        CHECK(std::abs(plus.expansion.xi1()) < 1e-12 * std::abs(plus.expansion.xi2()));
        CHECK(plus.expansion.phi_bar_ab == Approx(oracle_equilibrium(p.at_flux(f))).margin(1e-9));
        CHECK(std::abs(plus.omega_a - minus.omega_a) <= 1e-10 * plus.omega_a);
        CHECK(std::abs(plus.g2 + minus.g2) <= 1e-10 * std::max(std::abs(plus.g2), 1e-12));
    }
}
