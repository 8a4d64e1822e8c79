#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "stimosc/experiments.hpp"

using namespace stimosc;
using namespace stimosc::experiments;
using Catch::Approx;

namespace {

const circuit::CircuitParams params = circuit::CircuitParams::canonical();

Common paper_common() {
    Common c;
    c.delta = dynamics::delta_for_coupling(params, units::mhz_to_rad(25.0));
    c.model = SystemModel::from_circuit(params, c.delta);
    return c;
}

double rel(double a, double b) { return std::abs(a / b - 1.0); }

}  // namespace

TEST_CASE("tables serialize with the last axis fastest") {
    Table t{"grid", {{"x", "GHz", {1.0, 2.0}}, {"y", "", {10.0, 20.0, 30.0}}}, {}, {}};
    t.add("v", {0, 1, 2, 3, 4, 5});
    std::ostringstream os;
    t.write_csv(os);
    CHECK(os.str() == "x_GHz,y,v\n1,10,0\n1,20,1\n1,30,2\n2,10,3\n2,20,4\n2,30,5\n");

    Table precise{"p", {{"x", "", {1.0 / 3.0}}}, {}, {}};
    precise.add("v", {M_PI});
    std::ostringstream ps;
    precise.write_csv(ps);
    CHECK(ps.str() == "x,v\n0.333333333333,3.14159265359\n");

    Table bad = t;
    bad.data[0].pop_back();
    CHECK_THROWS_AS(bad.validate(), std::logic_error);
    CHECK_THROWS_AS((Axis{"x", "", {1.0, 3.0, 2.0}}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((Axis{"x", "", {}}.validate()), std::invalid_argument);
    CHECK_THROWS_AS(t.column("w"), std::out_of_range);

    ExperimentResult r;
    r.name = "demo";
    r.tables = {t};
    FitReport f;
    f.name = "f";
    f.add("a", 1.5, experiments::nan, "MHz");
    f.residual_norm = 0.0;
    r.fits = {f};
    const auto j = r.to_json();
    CHECK(j["fits"][0]["parameters"]["a"]["value"] == 1.5);
    CHECK(j["fits"][0]["parameters"]["a"]["error"].is_null());
    CHECK(j["tables"][0]["file"] == "demo_grid.csv");
    CHECK(j.begin().key() == "experiment");
}

TEST_CASE("peak finding and quadrature helpers") {
    const std::vector<double> y{0, 1, 0, 3, 0, 2, 2, 0};
    const auto p = detail::local_maxima(y);
    REQUIRE(p.size() == 3);
    CHECK(p[0] == 3);
    CHECK(p[1] == 5);
    CHECK(p[2] == 1);

    const auto gh = detail::gauss_hermite(12);
    double w = 0, m2 = 0, m4 = 0, m6 = 0;
    for (const auto& r : gh) {
        w += r.weight;
        m2 += r.weight * std::pow(r.detuning, 2);
        m4 += r.weight * std::pow(r.detuning, 4);
        m6 += r.weight * std::pow(r.detuning, 6);
    }
    CHECK(w == Approx(1.0).epsilon(1e-12));
    CHECK(m2 == Approx(1.0).epsilon(1e-12));
    CHECK(m4 == Approx(3.0).epsilon(1e-12));
    CHECK(m6 == Approx(15.0).epsilon(1e-12));
}

TEST_CASE("two-tone and pump-probe recover the injected splitting") {
    Common c = paper_common();
    const double injected = units::rad_to_mhz(std::sqrt(2.0) * std::abs(c.model.g2_tilde));
    REQUIRE(injected == Approx(25.0).epsilon(1e-6));

    const auto tt = two_tone_spectroscopy(c, default_two_tone_probe(c.model), default_pump_grid(c.model));
    const auto& split = tt.fit("splitting");
    CHECK_FALSE(split.low_confidence);
    CHECK(rel(split.value("sqrt2_g2"), injected) < 0.02);
    CHECK(split.value("gap") == Approx(50.0).margin(1.0));
    CHECK(split.value("slope") == Approx(-1.0).margin(0.02));
    CHECK(split.value("crossing_pump") == Approx(units::rad_to_ghz(c.model.optimal_pump())).margin(1e-3));
    CHECK(tt.table("map").points() == 13 * 121);

    const auto pp = pump_probe_spectroscopy(c, default_pump_probe_probe(c.model, 31), default_pump_grid(c.model, 7));
    const auto& cross = pp.fit("avoided_crossing");
    CHECK_FALSE(cross.low_confidence);
    CHECK(rel(cross.value("sqrt2_g2"), injected) < 0.02);
    CHECK(rel(cross.value("sqrt2_g2"), split.value("sqrt2_g2")) < 0.02);
    CHECK(cross.value("slope") == Approx(1.0).margin(0.02));
    // fixed level of the pump-probe crossing is |1⟩ → |2,0⟩ at ω′a + χaa
    CHECK(cross.value("fixed_level") == Approx(units::rad_to_ghz(c.model.omega_a_on() + c.model.chi_aa)).margin(1e-3));
    CHECK(pp.health.ok());
    REQUIRE(pp.summary.contains("optimal_pump_window_GHz"));
    const double lo = pp.summary["optimal_pump_window_GHz"][0], hi = pp.summary["optimal_pump_window_GHz"][1];
    // branches straddle ω01 symmetrically at ω_p = optimal + 2|χaa|
    const double symmetric = units::rad_to_ghz(c.model.optimal_pump() + 2.0 * std::abs(c.model.chi_aa));
    CHECK(lo <= symmetric);
    CHECK(hi >= symmetric);
    const double best = units::rad_to_mhz(std::hypot(c.model.chi_aa, std::sqrt(2.0) * std::abs(c.model.g2_tilde)));
    CHECK(double(pp.summary["max_isolation_MHz"]) == Approx(best).epsilon(0.01));
}

TEST_CASE("unresolved splitting is flagged") {
    Common c = paper_common();
    c.model.g2_tilde = units::mhz_to_rad(0.05);
    const auto probe = linspace(c.model.omega_b_on() - 0.02, c.model.omega_b_on() + 0.02, 41);
    const auto pump = linspace(c.model.optimal_pump() - 0.01, c.model.optimal_pump() + 0.01, 5);
    const auto tt = two_tone_spectroscopy(c, probe, pump);
    CHECK(tt.fit("splitting").low_confidence);
    CHECK(tt.summary["low_confidence"] == true);
}

TEST_CASE("stimulated coupling grows linearly with modulation amplitude") {
    Common c = paper_common();
    const auto r = g2_vs_amplitude(params, c, {0.01, 0.03, 0.05});
    const auto& lin = r.fit("linear");
    CHECK(lin.value("r_squared") > 0.999);
    const double dg2 = r.summary["dg2_dflux_MHz_per_phi0"];
    CHECK(rel(lin.value("slope"), dg2) < 0.01);
    const auto& fitted = r.table("g2").column("g2_tilde_MHz");
    const auto& injected = r.table("g2").column("g2_tilde_injected_MHz");
    for (std::size_t i = 0; i < fitted.size(); ++i) CHECK(rel(fitted[i], injected[i]) < 0.02);
    CHECK(double(r.summary["delta_for_25MHz_phi0"]) == Approx(c.delta).epsilon(1e-9));
}

TEST_CASE("chevron is symmetric about the single-photon line without Kerr") {
    Common c = paper_common();
    c.model = c.model.without_kerr();
    c.rates = NoiseRates::canonical();
    ChevronOptions opt;
    opt.space = {3, 2};
    opt.duration = 300.0;
    const ChevronSimulator sim(c, opt, c.model.kerr_free_pump());
    WarningCollector no_cross_kerr;
    const double w01 = c.model.omega_a_on();
    for (double amp : {0.01, 0.03}) {
        for (double d : {units::mhz_to_rad(3.0), units::mhz_to_rad(12.5)}) {
            const auto lo = sim(w01 - d, amp), hi = sim(w01 + d, amp);
            CHECK(lo.n_a == Approx(hi.n_a).margin(1e-6));
        }
    }
    // oracle lines sit symmetrically at ω01 ± √2g̃₂/2
    const auto oracle = chevron_oracle(c.model, opt.space, c.model.kerr_free_pump(), c.delta);
    const double half = std::sqrt(2.0) * std::abs(c.model.g2_tilde) / 2.0;
    CHECK(oracle.oracle_01 == Approx(w01).margin(1e-9));
    CHECK(oracle.oracle_02_minus_half == Approx(w01 - half).margin(1e-9));
    CHECK(oracle.oracle_02_plus_half == Approx(w01 + half).margin(1e-9));
}

TEST_CASE("chevron map bookkeeping") {
    Common c = paper_common();
    ChevronOptions opt;
    opt.space = {3, 2};
    opt.duration = 200.0;
    const auto freqs = linspace(c.model.omega_a_on() - 0.02, c.model.omega_a_on() + 0.02, 5);
    const auto r = rabi_chevron(c, freqs, {0.005, 0.01}, opt);
    const auto& t = r.table("map");
    CHECK(t.points() == 10);
    for (double v : t.column("n_a")) CHECK((v >= -1e-9 && v <= 2.0));
    for (double v : t.column("homodyne_proxy")) CHECK((v >= -1e-9 && v <= 1.0 + 1e-9));
    CHECK(r.health.ok());
}

TEST_CASE("Rabi frequency is twice the drive amplitude") {
    Common c = paper_common();
    const auto r = rabi_frequency_vs_amplitude(c, linspace(1e-3, 5e-3, 5));
    CHECK(r.fit("linear").value("slope") == Approx(2.0).epsilon(0.02));
    CHECK(r.health.ok());
}

TEST_CASE("steady-state linewidth follows the Bloch form") {
    Common c = paper_common();
    c.rates.kappa_phi_a = 1.0 / 20000.0;
    std::vector<double> amps;
    for (int i = 0; i < 9; ++i) amps.push_back(1e-5 * std::pow(300.0, i / 8.0));
    const auto r = fwhm_vs_amplitude(c, amps);
    const auto& w = r.table("fwhm").column("fwhm_MHz");
    const auto& bloch = r.table("fwhm").column("bloch_fwhm_MHz");
    // weak drive → undriven 2/T₂
    CHECK(w.front() == Approx(double(r.summary["undriven_fwhm_MHz"])).epsilon(0.02));
    for (std::size_t i = 0; i + 1 < w.size(); ++i) CHECK(rel(w[i], bloch[i]) < 0.01);
    CHECK(rel(r.fit("strong_drive").value("slope"), r.summary["bloch_slope"]) < 0.1);
}

TEST_CASE("coherent state decay") {
    Common c = paper_common();
    const auto r = coherent_state_decay(c, 3.0, linspace(0.0, 20000.0, 41));
    CHECK(double(r.summary["p0_at_zero"]) == Approx(std::exp(-9.0)).margin(1e-6));
    CHECK(rel(r.fit("decay").value("kappa"), units::rad_to_khz(c.rates.kappa_a)) < 0.01);
    CHECK(r.fit("decay").value("alpha_sq") == Approx(9.0).epsilon(1e-3));
}

TEST_CASE("population sector matches the full master equation") {
    Common c = paper_common();
    c.rates.kappa_phi_a = 1e-4;
    c.rates.n_thermal = 0.05;
    const HilbertSpace s{8, 2};
    DriveSettings d;
    d.omega_d = c.model.omega_a;
    d.omega_p = 2.0 * c.model.omega_a - c.model.omega_b;
    d.pump_level = 0.0;
    const auto h = dynamics::FrameHamiltonian(c.model, d, s).at(0.0);
    const auto w = lindblad::population_rate_matrix(h, c.rates);
    REQUIRE(w.has_value());
    const auto rho0 = DensityMatrix::coherent(s, cplx(1.0, 0.5));
    const auto tr = lindblad::evolve(rho0, h, c.rates, lindblad::SolverConfig{}, 0.0, 3000.0);
    const Eigen::VectorXd pops = (*w * 3000.0).exp() * rho0.matrix().diagonal().real();
    CHECK((pops - tr.final_state.diagonal().real()).cwiseAbs().maxCoeff() < 1e-8);

    d.pump_level = 1.0;
    d.delta = c.delta;
    CHECK_FALSE(lindblad::population_rate_matrix(dynamics::FrameHamiltonian(c.model, d, s).at(0.0), c.rates).has_value());
}

TEST_CASE("energy relaxation") {
    Common c = paper_common();
    const auto r = t1_experiment(c, linspace(0.0, 20000.0, 21));
    CHECK(rel(r.fit("decay").value("T"), 1e-3 / c.rates.kappa_a) < 0.02);
    CHECK(r.health.ok());

    c.rates = NoiseRates::none();
    const auto flat = t1_experiment(c, linspace(0.0, 2000.0, 5));
    CHECK(flat.fit("decay").low_confidence);
    CHECK(std::isinf(flat.fit("decay").value("T")));
}

TEST_CASE("Ramsey dephasing") {
    Common c = paper_common();
    c.rates.kappa_a = 1.0 / 4000.0;
    c.rates.kappa_phi_a = 1.0 / 2910.0;
    const auto r = ramsey_experiment(c, linspace(0.0, 6000.0, 61), units::mhz_to_rad(1.0));
    CHECK(double(r.summary["predicted_T2_star_us"]) == Approx(2.134).epsilon(1e-3));
    CHECK(rel(r.fit("damped_cosine").value("T2_star"), r.summary["predicted_T2_star_us"]) < 0.02);
    CHECK(r.fit("damped_cosine").value("fringe") == Approx(1.0).epsilon(0.01));
    CHECK(r.warnings.empty());

    WarningCollector w;
    const auto slow = ramsey_experiment(c, linspace(0.0, 1000.0, 11), units::mhz_to_rad(0.1));
    CHECK(slow.warnings.size() == 1);
    CHECK(w.messages().size() == 1);
}

TEST_CASE("echo refocuses quasi-static detuning") {
    Common c = paper_common();
    c.rates.kappa_a = 1.0 / 4000.0;
    const auto delays = linspace(0.0, 16000.0, 9);
    const auto pure = echo_experiment(c, delays);
    CHECK(pure.fit("decay").value("T") / 4.0 == Approx(2.0).epsilon(0.05));

    CoherenceOptions opt;
    opt.quasi_static_sigma = quasi_static_sigma_for(2910.0);
    opt.quadrature_nodes = 8;
    const auto noisy = echo_experiment(c, delays, opt);
    CHECK(double(noisy.summary["t2e_over_t1"]) > 1.8);
    CHECK(noisy.summary["realizations"] == 8);

    // the same noise without the refocusing pulse: gaussian envelope exp(−(τ/T_φ)²)
    c.rates.kappa_a = 1e-9;
    const auto ramsey = ramsey_experiment(c, linspace(0.0, 4000.0, 41), units::mhz_to_rad(1.0), opt);
    const auto& s = ramsey.table("ramsey").column("contrast");
    const double tau = 2910.0;
    // whole fringe periods: the contrast ratio is the noise envelope alone
    const auto times = linspace(0.0, 4000.0, 41);
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (std::abs(times[i] - 3000.0) < 1e-9) {
            CHECK(s[i] / s[0] == Approx(std::exp(-std::pow(3000.0 / tau, 2))).margin(0.03));
        }
    }
}

TEST_CASE("monte carlo noise averaging is seeded") {
    Common c = paper_common();
    CoherenceOptions opt;
    opt.quasi_static_sigma = quasi_static_sigma_for(2910.0);
    opt.average = NoiseAverage::monte_carlo;
    opt.realizations = 3;
    const auto delays = linspace(0.0, 2000.0, 11);
    auto csv = [&](std::uint64_t seed) {
        Common cc = c;
        cc.seed = seed;
        std::ostringstream os;
        ramsey_experiment(cc, delays, units::mhz_to_rad(1.0), opt).tables[0].write_csv(os);
        return os.str();
    };
    WarningCollector quiet;
    CHECK(csv(7) == csv(7));
    CHECK(csv(7) != csv(8));
}
