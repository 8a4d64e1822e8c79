#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "stimosc/lindblad.hpp"
#include "stimosc/pulses.hpp"

using namespace stimosc;
using namespace stimosc::pulses;
using Catch::Approx;

namespace {

double mhz(double x) { return 2.0 * M_PI * x * 1e-3; }

// Closed two-level drive ε(t)(e^{iφ}a† + h.c.) from vacuum; returns ⟨a†a⟩.
double two_level_response(const std::vector<Envelope>& pulses_in, double t_end) {
    const HilbertSpace q{2, 2};
    dynamics::TimeDependentOperator h(q);
    const Matrix a = ladder(q, Mode::logical).matrix();
    PulseSequence seq(t_end);
    for (const auto& e : pulses_in) seq.add(Channel::logical_drive, e);
    h.add_complex(a.adjoint(), [seq](double t) { return seq.sample(Channel::logical_drive, std::min(t, seq.total_duration())); });
    lindblad::SolverConfig cfg;
    cfg.dt = 1.0;
    const auto tr = lindblad::evolve(DensityMatrix::vacuum(q), h, lindblad::NoiseRates::none(), cfg, 0.0, t_end,
                                     {number(q, Mode::logical).matrix()});
    return tr.expectations[0].back().real();
}

dynamics::SystemModel pumped_model(double sqrt2_g2_mhz) {
    dynamics::SystemModel m;
    m.omega_a = 2 * M_PI * 4.3;
    m.omega_b = 2 * M_PI * 7.3;
    m.chi_aa = -mhz(2.85);
    m.chi_bb = -mhz(22.9);
    m.chi_ab = -mhz(16.2);
    m.g2_tilde = mhz(sqrt2_g2_mhz) / std::sqrt(2.0);
    return m;
}

}  // namespace

TEST_CASE("envelope sampling closed forms") {
    const auto sq = Envelope::square(10.0, 20.0, 0.7);
    CHECK(sq.at(20.0) == cplx(0.7, 0.0));
    CHECK(sq.at(5.0) == cplx(0.0, 0.0));

    const auto g = Envelope::gaussian(0.0, 400.0, 2.0);
    CHECK(g.at(200.0).real() == Approx(2.0));
    CHECK(g.at(0.0).real() == Approx(2.0 * std::exp(-2.0)));
    CHECK(g.at(400.0).real() == Approx(2.0 * std::exp(-2.0)));
    CHECK(g.at(400.1).real() == 0.0);

    const auto y = Envelope::square(0.0, 10.0, 1.0, M_PI / 2);
    CHECK(std::abs(y.at(5.0) - cplx(0.0, 1.0)) < 1e-15);

    const auto p = Envelope::plateau(0.0, 100.0, 20.0);
    CHECK(p.at(50.0).real() == Approx(1.0));
    CHECK(p.at(10.0).real() == Approx(0.5));
    CHECK(p.at(0.0).real() == Approx(0.0).margin(1e-15));

    // areas against trapezoid quadrature
    for (const auto& e : {sq, g, p}) {
        double sum = 0.0;
        const int n = 200000;
        const double h = e.duration / n;
        for (int i = 0; i <= n; ++i) sum += (i == 0 || i == n ? 0.5 : 1.0) * e.shape_at(e.t_start + i * h);
        CHECK(e.shape_area() == Approx(sum * h).epsilon(1e-8));
    }
    CHECK_THROWS_AS(Envelope::square(0.0, 0.0).validate(), std::invalid_argument);
}

TEST_CASE("sequence validation and sampling") {
    PulseSequence seq;
    seq.add(Channel::flux_pump, Envelope::plateau(0.0, 1000.0, 50.0));
    seq.add(Channel::logical_drive, Envelope::gaussian(0.0, 1000.0, 0.5));
    seq.add_readout(1000.0, 500.0);
    CHECK_NOTHROW(seq.validate());
    CHECK(seq.total_duration() == 1500.0);
    CHECK(seq.sample("logical_drive", 500.0).real() == Approx(0.5));
    CHECK_THROWS_AS(seq.sample("readout_tone", 10.0), std::invalid_argument);
    CHECK_THROWS_AS(seq.sample(Channel::flux_pump, 2000.0), std::out_of_range);

    PulseSequence overlap = seq;
    overlap.add(Channel::logical_drive, Envelope::square(900.0, 50.0));
    CHECK_THROWS_AS(overlap.validate(), std::invalid_argument);

    PulseSequence pumped_readout;
    pumped_readout.add(Channel::flux_pump, Envelope::square(0.0, 100.0));
    pumped_readout.add_readout(50.0, 100.0);
    CHECK_THROWS_AS(pumped_readout.validate(), std::invalid_argument);

    std::ostringstream os;
    seq.write_csv(os, 500.0);
    const std::string csv = os.str();
    CHECK(csv.rfind("time_ns,flux_pump_re,flux_pump_im,logical_drive_re,logical_drive_im,blockade_probe_re,"
                    "blockade_probe_im\n",
                    0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("pi pulse calibration on a two-level system") {
    const double t = 100.0;
    const auto shape = Envelope::square(0.0, t);
    const auto cal = calibrate_pi_pulse(shape, [&](const Envelope& e) { return two_level_response({e}, t); });
    const double expect = M_PI / (2.0 * t);
    CHECK(cal.pi_amplitude == Approx(expect).epsilon(0.02));
    CHECK(cal.peak_response == Approx(1.0).margin(1e-6));
    CHECK(cal.half_pi_amplitude == Approx(0.5 * cal.pi_amplitude));

    Envelope zero = shape;
    zero.duration = 0.0;
    CHECK_THROWS(calibrate_pi_pulse(zero, [&](const Envelope& e) { return two_level_response({e}, t); }));
    // flat response: no interior maximum
    CHECK_THROWS(calibrate_pi_pulse(shape, [](const Envelope&) { return 0.3; }));
}

TEST_CASE("pulse area additivity") {
    const double t = 100.0;
    const double amp = M_PI / (2.0 * t);
    const double one = two_level_response({Envelope::square(0.0, t, amp)}, t);
    const double two = two_level_response({Envelope::square(0.0, t, amp / 2), Envelope::square(t, t, amp / 2)}, 2 * t);
    CHECK(two == Approx(one).margin(0.02));
    CHECK(two_level_response({Envelope::square(0.0, t / 2, amp), Envelope::square(t / 2, t / 2, amp, M_PI)}, t) < 1e-6);
}

TEST_CASE("calibrated gaussian pulses in the pumped oscillator") {
    const HilbertSpace s{4, 2};
    const auto model = pumped_model(25.0);
    dynamics::DriveSettings drive;
    drive.omega_d = model.omega_a_on();
    drive.omega_p = model.optimal_pump();
    drive.delta = 0.1;
    const Matrix n = number(s, Mode::logical).matrix();
    lindblad::SolverConfig cfg;
    cfg.dt = 2.0;

    auto run = [&](const std::vector<Envelope>& env, double t_end, const lindblad::NoiseRates& rates) {
        auto seq = std::make_shared<PulseSequence>(t_end);
        seq->add(Channel::flux_pump, Envelope::square(0.0, t_end));
        for (const auto& e : env) seq->add(Channel::logical_drive, e);
        dynamics::DriveSettings d = drive;
        d.eps_d = 1.0;  // envelope amplitude carries rad/ns
        d.sequence = seq;
        const dynamics::FrameHamiltonian f(model, d, s);
        return lindblad::evolve(DensityMatrix::vacuum(s), f.decomposition(), rates, cfg, 0.0, t_end, {n});
    };

    // 4σ = 1 μs: single-photon transition isolated from |1⟩ → |2±⟩
    const double width = 1000.0;
    const auto shape = Envelope::gaussian(0.0, width);
    const auto cal = calibrate_pi_pulse(
        shape, [&](const Envelope& e) { return run({e}, width, lindblad::NoiseRates::none()).expectations[0].back().real(); },
        std::nullopt, 1e-4);
    CHECK(cal.pi_amplitude == Approx(ideal_pi_amplitude(shape)).epsilon(0.02));
    const auto tr = run({Envelope::gaussian(0.0, width, cal.pi_amplitude)}, width, lindblad::NoiseRates::none());
    const DensityMatrix rho(s, tr.final_state, StateTolerance{1e-7, 1e-8, -1e-7});
    const double leakage = 1.0 - rho.population(0, 0) - rho.population(1, 0);
    CHECK(leakage < 0.01);

    // π then π again, with loss: back near vacuum (short pulses keep decay small)
    const double short_width = 200.0;
    const auto short_cal = calibrate_pi_pulse(
        Envelope::gaussian(0.0, short_width),
        [&](const Envelope& e) { return run({e}, short_width, lindblad::NoiseRates::none()).expectations[0].back().real(); },
        std::nullopt, 1e-4);
    const auto twice = run({Envelope::gaussian(0.0, short_width, short_cal.pi_amplitude),
                            Envelope::gaussian(short_width, short_width, short_cal.pi_amplitude)},
                           2 * short_width, lindblad::NoiseRates::canonical());
    CHECK(twice.expectations[0].back().real() < 0.05);
    CHECK(twice.health.ok());
}
