#pragma once

// Invariant suite run by `stimosc selftest`: each check evaluates one
// property against an independent oracle and reports value vs threshold.

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "stimosc/circuit_model.hpp"
#include "stimosc/dynamics_model.hpp"
#include "stimosc/experiments.hpp"
#include "stimosc/lindblad.hpp"
#include "stimosc/tomography.hpp"

namespace stimosc::selftest {

struct Check {
    std::string name;
    bool passed = false;
    double value = 0.0;
    std::string comparison;  // e.g. "< 1e-8"
    std::string detail;
    double seconds = 0.0;
};

namespace detail {

inline Matrix random_hermitian(int d, std::mt19937& rng, double scale) {
    std::normal_distribution<double> g(0.0, scale);
    Matrix m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = cplx(g(rng), g(rng));
    return 0.5 * (m + m.adjoint());
}

inline Matrix random_state(int d, std::mt19937& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = cplx(g(rng), g(rng));
    Matrix rho = a * a.adjoint();
    return rho / rho.trace();
}

inline dynamics::SystemModel reference_model(double delta = 0.1) {
    return dynamics::SystemModel::from_circuit(circuit::CircuitParams::canonical(), delta);
}

}  // namespace detail

// |g₂(Φ) + g₂(−Φ)| and |g₂(0)|.
inline double g2_parity_error(const circuit::CircuitParams& p = circuit::CircuitParams::canonical()) {
    double worst = std::abs(circuit::normal_modes(p.at_flux(0.0)).g2);
    for (double f : {0.02, 0.05, 0.1, 0.2, 0.3, 0.45}) {
        const double plus = circuit::normal_modes(p.at_flux(f)).g2, minus = circuit::normal_modes(p.at_flux(-f)).g2;
        worst = std::max(worst, std::abs(plus + minus));
    }
    return worst;
}

// Max elementwise deviation of evolve (every integrator) from exp(Lt) on a
// random dimension-12 system.
inline double liouvillian_oracle_error(unsigned seed = 17) {
    const HilbertSpace s{4, 3};
    std::mt19937 rng(seed);
    const Operator h(s, detail::random_hermitian(s.dim(), rng, 0.05), true);
    const lindblad::NoiseRates r{0.004, 0.01, 0.002, 0.05};
    const DensityMatrix rho0(s, detail::random_state(s.dim(), rng));
    const double t = 40.0;
    const Matrix sup = lindblad::liouvillian_superoperator(h.matrix(), lindblad::collapse_operators(s, r));
    const Vector v0 = Eigen::Map<const Vector>(rho0.matrix().data(), s.dim() * s.dim());
    const Vector vt = (sup * t).exp() * v0;
    const Matrix expected = Eigen::Map<const Matrix>(vt.data(), s.dim(), s.dim());
    double worst = 0.0;
    for (auto m : {lindblad::Method::lawson_rk4, lindblad::Method::rk4, lindblad::Method::rk45}) {
        lindblad::SolverConfig cfg;
        cfg.method = m;
        cfg.rtol = 1e-11;
        cfg.atol = 1e-13;
        const auto tr = lindblad::evolve(rho0, h, r, cfg, 0.0, t);
        worst = std::max(worst, (tr.final_state - expected).cwiseAbs().maxCoeff());
    }
    return worst;
}

// Lab-frame RK4 on the Schrödinger equation vs exact rotating-frame
// propagation over 50 ns; max amplitude deviation after unwinding the frame.
inline double frame_equivalence_error() {
    const HilbertSpace s{4, 3};
    auto m = detail::reference_model();
    dynamics::DriveSettings d;
    d.omega_d = m.omega_a_on() + units::mhz_to_rad(2.0);
    d.omega_p = m.optimal_pump() - units::mhz_to_rad(3.0);
    d.eps_d = units::mhz_to_rad(6.0);
    d.delta = 0.1;
    const Matrix h_rot = dynamics::rotating_frame_hamiltonian(m, d, s, 0.0).matrix();
    const auto lab = dynamics::lab_frame_hamiltonian(m, d, s);
    const double t_end = 50.0;
    Vector psi0 = Vector::Zero(s.dim());
    psi0(s.index(0, 0)) = 1.0;
    const Vector psi_rot = fock::expm(cplx(0, -t_end) * h_rot) * psi0;
    const double dt = 5e-4;
    Vector psi = psi0;
    auto deriv = [&](double t, const Vector& v) -> Vector { return cplx(0, -1) * (lab.at(t) * v); };
    const int steps = static_cast<int>(std::lround(t_end / dt));
    for (int k = 0; k < steps; ++k) {
        const double t = k * dt;
        const Vector k1 = deriv(t, psi);
        const Vector k2 = deriv(t + dt / 2, psi + dt / 2 * k1);
        const Vector k3 = deriv(t + dt / 2, psi + dt / 2 * k2);
        const Vector k4 = deriv(t + dt, psi + dt * k3);
        psi += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    double worst = 0.0;
    for (int k = 0; k < s.dim(); ++k) {
        const double phase = t_end * (d.omega_d * s.logical_of(k) + d.omega_b_frame() * s.blockade_of(k));
        worst = std::max(worst, std::abs(std::polar(1.0, phase) * psi(k) - psi_rot(k)));
    }
    return worst;
}

// Step-halving error ratio of fixed-step RK4 on a driven, damped reference run.
inline double rk4_convergence_ratio() {
    const HilbertSpace s{4, 2};
    const Matrix a = ladder(s, Mode::logical).matrix();
    const Operator h(s, 0.4 * number(s, Mode::logical).matrix() + 0.3 * (a + a.adjoint()), true);
    const Matrix n = number(s, Mode::logical).matrix();
    auto run = [&](double dt, int stride) {
        lindblad::SolverConfig cfg;
        cfg.method = lindblad::Method::rk4;
        cfg.dt = dt;
        cfg.step_safety = 1e-9;
        const auto full = lindblad::evolve(DensityMatrix::vacuum(s), h, lindblad::NoiseRates{0.01, 0.0, 0.0, 0.0}, cfg,
                                           0.0, 20.0, {n})
                              .real(0);
        std::vector<double> out;
        for (std::size_t i = 0; i < full.size(); i += stride) out.push_back(full[i]);
        return out;
    };
    const double dt = 0.4;
    const auto f1 = run(dt, 1), f2 = run(dt / 2, 2), f4 = run(dt / 4, 4);
    double e12 = 0, e24 = 0;
    for (std::size_t i = 0; i < f1.size(); ++i) {
        e12 = std::max(e12, std::abs(f1[i] - f2[i]));
        e24 = std::max(e24, std::abs(f2[i] - f4[i]));
    }
    return e12 / e24;
}

// Health of a pumped, pulsed, lossy trajectory.
inline lindblad::Health pulsed_trajectory_health() {
    const HilbertSpace s{4, 2};
    const auto m = detail::reference_model();
    auto seq = std::make_shared<pulses::PulseSequence>(1000.0);
    seq->add(pulses::Channel::flux_pump, pulses::Envelope::plateau(0.0, 1000.0, 50.0));
    seq->add(pulses::Channel::logical_drive, pulses::Envelope::gaussian(100.0, 400.0, 0.01));
    dynamics::DriveSettings d;
    d.omega_d = m.omega_a_on();
    d.omega_p = m.optimal_pump();
    d.delta = 0.1;
    d.eps_d = 1.0;
    d.sequence = seq;
    lindblad::NoiseRates r = lindblad::NoiseRates::canonical();
    r.kappa_phi_a = 1e-4;
    r.n_thermal = 0.05;
    return lindblad::evolve(DensityMatrix::vacuum(s), dynamics::FrameHamiltonian(m, d, s).decomposition(), r,
                            lindblad::SolverConfig{}, 0.0, 1000.0)
        .health;
}

inline double parity_sum_error() {
    std::mt19937 rng(5);
    const Matrix rho = detail::random_state(6, rng);
    const auto p = tomography::readout_distribution(rho, tomography::ReadoutModel::exact());
    double sum = 0.0, tr = 0.0;
    for (std::size_t n = 0; n < p.size(); ++n) sum += (n % 2 ? -1.0 : 1.0) * p[n];
    for (int n = 0; n < rho.rows(); ++n) tr += (n % 2 ? -1.0 : 1.0) * rho(n, n).real();
    return std::abs(sum - tr);
}

inline double wigner_normalization_error() {
    WarningCollector quiet;
    Matrix one = Matrix::Zero(4, 4);
    one(1, 1) = 1.0;
    return std::abs(tomography::wigner_map(one, tomography::WignerGrid::square(4.0, 81)).integral(4.0) - 1.0);
}

inline double reconstruction_inverse_error() {
    std::mt19937 rng(9);
    const Matrix truth = detail::random_state(4, rng);
    const auto rec = tomography::reconstruct(tomography::wigner_map(truth, tomography::WignerGrid::square(2.0, 21)), 4);
    return (rec.rho - truth).cwiseAbs().maxCoeff();
}

// |F(t) − e^{−κt}| for |1⟩ under amplitude damping.
inline double damping_fidelity_error() {
    const HilbertSpace s{3, 2};
    const double kappa = 2e-4, t = 2000.0;
    const Operator zero(s, Matrix::Zero(s.dim(), s.dim()), true);
    const auto tr = lindblad::evolve(DensityMatrix::fock(s, 1, 0), zero, lindblad::NoiseRates{kappa, 0.0, 0.0, 0.0},
                                     lindblad::SolverConfig{}, 0.0, t);
    const DensityMatrix rho(s, tr.final_state, StateTolerance{1e-7, 1e-8, -1e-7});
    return std::abs(tomography::fidelity(rho.reduced_logical(), tomography::target_vector(tomography::TargetState::one, 3)) -
                    std::exp(-kappa * t));
}

inline double chevron_symmetry_error() {
    experiments::Common c;
    c.model = detail::reference_model().without_kerr();
    c.delta = 0.1;
    experiments::ChevronOptions opt;
    opt.space = {3, 2};
    opt.duration = 200.0;
    const experiments::ChevronSimulator sim(c, opt, c.model.kerr_free_pump());
    const double w01 = c.model.omega_a_on();
    double worst = 0.0;
    WarningCollector quiet;
    for (double d : {units::mhz_to_rad(4.0), units::mhz_to_rad(9.0)}) {
        worst = std::max(worst, std::abs(sim(w01 - d, 0.02).n_a - sim(w01 + d, 0.02).n_a));
    }
    return worst;
}

inline double coherent_p0_error() {
    experiments::Common c;
    c.model = detail::reference_model();
    const auto r = experiments::coherent_state_decay(c, 3.0, {0.0, 1000.0, 2000.0, 4000.0});
    return std::abs(double(r.summary["p0_at_zero"]) - std::exp(-9.0));
}

inline std::vector<Check> run_all() {
    struct Spec {
        std::string name;
        std::function<double()> eval;
        std::function<bool(double)> pass;
        std::string comparison;
    };
    const std::vector<Spec> specs = {
        {"g2_odd_in_flux", [] { return g2_parity_error(); }, [](double v) { return v <= 1e-10; }, "<= 1e-10"},
        {"evolve_matches_liouvillian_exponential", [] { return liouvillian_oracle_error(); },
         [](double v) { return v < 1e-8; }, "< 1e-8"},
        {"lab_vs_rotating_frame", [] { return frame_equivalence_error(); }, [](double v) { return v < 1e-3; }, "< 1e-3"},
        {"rk4_halving_ratio", [] { return rk4_convergence_ratio(); }, [](double v) { return v >= 12.0 && v <= 20.0; },
         "in [12, 20]"},
        {"pulsed_trajectory_health",
         [] {
             const auto h = pulsed_trajectory_health();
             return h.ok() ? h.max_trace_error : INFINITY;
         },
         [](double v) { return std::isfinite(v); }, "trace, hermiticity and positivity within tolerance"},
        {"parity_sum_identity", [] { return parity_sum_error(); }, [](double v) { return v < 1e-10; }, "< 1e-10"},
        {"wigner_normalization", [] { return wigner_normalization_error(); }, [](double v) { return v < 0.02; }, "< 0.02"},
        {"reconstruction_left_inverse", [] { return reconstruction_inverse_error(); }, [](double v) { return v < 1e-6; },
         "< 1e-6"},
        {"amplitude_damping_fidelity", [] { return damping_fidelity_error(); }, [](double v) { return v < 1e-6; },
         "< 1e-6"},
        {"chevron_symmetry_without_kerr", [] { return chevron_symmetry_error(); }, [](double v) { return v < 1e-6; },
         "< 1e-6"},
        {"coherent_state_vacuum_overlap", [] { return coherent_p0_error(); }, [](double v) { return v < 1e-6; },
         "< 1e-6"},
    };
    std::vector<Check> out;
    for (const auto& s : specs) {
        Check c;
        c.name = s.name;
        c.comparison = s.comparison;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.value = s.eval();
            c.passed = s.pass(c.value);
        } catch (const std::exception& e) {
            c.passed = false;
            c.value = NAN;
            c.detail = e.what();
        }
        c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.push_back(c);
    }
    return out;
}

inline nlohmann::ordered_json report(const std::vector<Check>& checks) {
    nlohmann::ordered_json j;
    bool all = true;
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& c : checks) {
        all = all && c.passed;
        nlohmann::ordered_json e;
        e["name"] = c.name;
        e["passed"] = c.passed;
        e["value"] = std::isfinite(c.value) ? nlohmann::ordered_json(c.value) : nlohmann::ordered_json(nullptr);
        e["criterion"] = c.comparison;
        if (!c.detail.empty()) e["detail"] = c.detail;
        e["seconds"] = c.seconds;
        arr.push_back(e);
    }
    j["passed"] = all;
    j["checks"] = arr;
    return j;
}

}  // namespace stimosc::selftest
