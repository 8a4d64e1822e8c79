#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "stimosc/lindblad.hpp"

using namespace stimosc;
using namespace stimosc::lindblad;
using Catch::Approx;

namespace {

// Superoperator assembled element by element from the Lindblad formula:
// L[(i,j),(k,l)] acting on column-stacked ρ.
Matrix oracle_superoperator(const Matrix& h, const std::vector<Matrix>& jumps) {
    const auto d = h.rows();
    Matrix out = Matrix::Zero(d * d, d * d);
    auto idx = [d](Eigen::Index i, Eigen::Index j) { return j * d + i; };
    Matrix loss = Matrix::Zero(d, d);
    for (const auto& l : jumps) loss += l.adjoint() * l;
    const cplx I(0, 1);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            for (Eigen::Index k = 0; k < d; ++k)
                for (Eigen::Index l = 0; l < d; ++l) {
                    cplx v = 0.0;
                    // (Hρ)_ij = H_ik ρ_kj   ;  (ρH)_ij = ρ_il H_lj
                    if (l == j) v += -I * h(i, k) - 0.5 * loss(i, k);
                    if (k == i) v += I * h(l, j) - 0.5 * loss(l, j);
                    for (const auto& L : jumps) v += L(i, k) * std::conj(L(j, l));
                    out(idx(i, j), idx(k, l)) += v;
                }
    return out;
}

Matrix random_hermitian(int d, std::mt19937& rng, double scale) {
    std::normal_distribution<double> g(0.0, scale);
    Matrix m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = cplx(g(rng), g(rng));
    return 0.5 * (m + m.adjoint());
}

Matrix random_state(int d, std::mt19937& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = cplx(g(rng), g(rng));
    Matrix rho = a * a.adjoint();
    return rho / rho.trace();
}

}  // namespace

TEST_CASE("rhs basic properties") {
    const HilbertSpace s{5, 3};
    NoiseRates r{0.01, 0.02, 0.003, 0.1};
    const Operator zero(s, Matrix::Zero(s.dim(), s.dim()), true);
    NoiseRates loss{0.01, 0.02, 0.0, 0.0};
    CHECK(rhs(DensityMatrix::vacuum(s), zero, loss).cwiseAbs().maxCoeff() < 1e-15);

    const auto d1 = rhs(DensityMatrix::fock(s, 1, 0), zero, NoiseRates{0.01, 0.0, 0.0, 0.0});
    const Matrix n = number(s, Mode::logical).matrix();
    CHECK((d1.transpose().cwiseProduct(n)).sum().real() == Approx(-0.01).epsilon(1e-12));

    std::mt19937 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const DensityMatrix rho(s, random_state(s.dim(), rng));
        const Operator h(s, random_hermitian(s.dim(), rng, 1.0), true);
        const Matrix d = rhs(rho, h, r);
        CHECK(std::abs(d.trace()) < 1e-12);
        CHECK((d - d.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK_THROWS_AS(rhs(DensityMatrix::vacuum(HilbertSpace{4, 3}), zero, r), std::invalid_argument);
}

TEST_CASE("decay closed forms") {
    const HilbertSpace s{20, 2};
    const double kappa = 0.01;
    const Operator zero(s, Matrix::Zero(s.dim(), s.dim()), true);
    const NoiseRates r{kappa, 0.0, 0.0, 0.0};
    SolverConfig cfg;
    cfg.dt = 2.0;
    const Matrix n = number(s, Mode::logical).matrix();
    const Matrix a = ladder(s, Mode::logical).matrix();

    const auto tr = evolve(DensityMatrix::fock(s, 1, 0), zero, r, cfg, 0.0, 300.0, {n});
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        CHECK(std::abs(tr.expectations[0][i].real() - std::exp(-kappa * tr.times[i])) < 1e-6);
    }

    const cplx alpha0(1.5, 0.5);
    const auto tc = evolve(DensityMatrix::coherent(s, alpha0), zero, r, cfg, 0.0, 300.0, {a});
    for (std::size_t i = 0; i < tc.times.size(); ++i) {
        CHECK(std::abs(tc.expectations[0][i] - alpha0 * std::exp(-kappa * tc.times[i] / 2)) < 1e-6);
    }
    CHECK(tc.health.ok());
}

TEST_CASE("evolve matches the Liouvillian exponential") {
    const HilbertSpace s{4, 3};  // dimension 12
    std::mt19937 rng(17);
    const Operator h(s, random_hermitian(s.dim(), rng, 0.05), true);
    const NoiseRates r{0.004, 0.01, 0.002, 0.05};
    const DensityMatrix rho0(s, random_state(s.dim(), rng));
    const double t = 40.0;

    const Matrix sup = oracle_superoperator(h.matrix(), collapse_operators(s, r));
    CHECK((sup - liouvillian_superoperator(h.matrix(), collapse_operators(s, r))).cwiseAbs().maxCoeff() < 1e-14);
    const Vector v0 = Eigen::Map<const Vector>(rho0.matrix().data(), s.dim() * s.dim());
    const Vector vt = (sup * t).exp() * v0;
    const Matrix expected = Eigen::Map<const Matrix>(vt.data(), s.dim(), s.dim());

    for (Method m : {Method::lawson_rk4, Method::rk4, Method::rk45}) {
        SolverConfig cfg;
        cfg.method = m;
        cfg.dt = 0.5;
        cfg.rtol = 1e-11;
        cfg.atol = 1e-13;
        const auto tr = evolve(rho0, h, r, cfg, 0.0, t);
        INFO(to_string(m));
        CHECK((tr.final_state - expected).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(tr.health.ok());
    }
}

TEST_CASE("time-dependent integrators agree") {
    const HilbertSpace s{5, 3};
    dynamics::TimeDependentOperator h(s);
    h.constant = 0.3 * number(s, Mode::logical).matrix() - 0.1 * number(s, Mode::blockade).matrix();
    const Matrix a = ladder(s, Mode::logical).matrix();
    const Matrix b = ladder(s, Mode::blockade).matrix();
    h.add_complex(a.adjoint(), [](double t) { return 0.05 * std::exp(-std::pow((t - 50) / 15, 2)) * std::polar(1.0, 0.2); });
    h.add(a.adjoint() * a.adjoint() * b + b.adjoint() * a * a, [](double t) { return 0.02 * std::sin(0.05 * t); });
    const NoiseRates r{0.003, 0.01, 0.001, 0.0};
    SolverConfig lawson, adaptive;
    lawson.dt = 1.0;
    adaptive.method = Method::rk45;
    adaptive.dt = 1.0;
    adaptive.rtol = 1e-11;
    adaptive.atol = 1e-13;
    const auto x = evolve(DensityMatrix::vacuum(s), h, r, lawson, 0.0, 100.0);
    const auto y = evolve(DensityMatrix::vacuum(s), h, r, adaptive, 0.0, 100.0);
    CHECK((x.final_state - y.final_state).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(x.final_state(s.index(1, 0), s.index(1, 0)).real() > 1e-3);
}

TEST_CASE("pure dephasing closed form") {
    const HilbertSpace s{4, 2};
    const double kphi = 0.004;
    Vector psi = Vector::Zero(s.dim());
    for (int n = 0; n < 4; ++n) psi(s.index(n, 0)) = 0.5;
    const auto rho0 = DensityMatrix::from_ket(s, psi);
    const Operator zero(s, Matrix::Zero(s.dim(), s.dim()), true);
    SolverConfig cfg;
    cfg.dt = 5.0;
    const auto tr = evolve(rho0, zero, NoiseRates{0.0, 0.0, kphi, 0.0}, cfg, 0.0, 200.0);
    for (int m = 0; m < 4; ++m)
        for (int n = 0; n < 4; ++n) {
            const double expect = 0.25 * std::exp(-kphi * (m - n) * (m - n) * 200.0);
            CHECK(std::abs(tr.final_state(s.index(m, 0), s.index(n, 0)) - expect) < 1e-10);
        }
}

TEST_CASE("fixed-step RK4 converges at fourth order") {
    const HilbertSpace s{4, 2};
    const Matrix a = ladder(s, Mode::logical).matrix();
    const Operator h(s, 0.4 * number(s, Mode::logical).matrix() + 0.3 * (a + a.adjoint()), true);
    const Matrix n = number(s, Mode::logical).matrix();
    for (Method m : {Method::rk4, Method::lawson_rk4}) {
        auto run = [&](double dt) {
            SolverConfig cfg;
            cfg.method = m;
            cfg.dt = dt;
            cfg.step_safety = 1e-9;  // one internal step per dt
            return evolve(DensityMatrix::vacuum(s), h, NoiseRates{0.01, 0.0, 0.0, 0.0}, cfg, 0.0, 20.0, {n}).real(0);
        };
        // compare on the common coarse grid
        auto coarse = [&](double dt, int factor) {
            const auto full = run(dt);
            std::vector<double> out;
            for (std::size_t i = 0; i < full.size(); i += factor) out.push_back(full[i]);
            return out;
        };
        const double dt = 0.4;
        const auto f1 = coarse(dt, 1), f2 = coarse(dt / 2, 2), f4 = coarse(dt / 4, 4);
        double e12 = 0, e24 = 0;
        for (std::size_t i = 0; i < f1.size(); ++i) {
            e12 = std::max(e12, std::abs(f1[i] - f2[i]));
            e24 = std::max(e24, std::abs(f2[i] - f4[i]));
        }
        INFO(to_string(m));
        CHECK(e12 / e24 > 12.0);
        CHECK(e12 / e24 < 20.0);
    }
}

TEST_CASE("steady states") {
    const HilbertSpace s{3, 6};
    const Matrix b = ladder(s, Mode::blockade).matrix();
    const Matrix nb = number(s, Mode::blockade).matrix();
    const NoiseRates r{0.002, 0.02, 0.0, 0.0};

    const auto vac = steady_state(Operator(s, 0.1 * nb, true), r);
    CHECK(vac.population(0, 0) == Approx(1.0).margin(1e-10));

    // weakly probed linear cavity: ⟨b⟩ = −ε/(Δ − iκ/2)
    const double eps = 1e-4;
    std::vector<double> detunings, response;
    for (int i = -20; i <= 20; ++i) {
        const double det = 0.004 * i;
        const Operator h(s, det * nb + eps * (b + b.adjoint()), true);
        SteadyStateInfo info;
        const auto ss = steady_state(h, r, &info);
        const cplx mean = expectation(ss, Operator(s, b));
        const cplx expect = -eps / cplx(det, -r.kappa_b / 2);
        CHECK(std::abs(mean - expect) < 1e-9);
        CHECK(info.residual < 1e-10);
        detunings.push_back(det);
        response.push_back(std::norm(mean));
    }
    const auto lor = fit::lorentzian(detunings, response);
    CHECK(lor.params(2) == Approx(r.kappa_b).epsilon(1e-3));

    // strongly driven two-level system saturates at one half
    const HilbertSpace q{2, 2};
    const Matrix a = ladder(q, Mode::logical).matrix();
    const auto sat = steady_state(Operator(q, 1.0 * (a + a.adjoint()), true), NoiseRates{0.001, 0.001, 0.0, 0.0});
    CHECK(sat.reduced_logical()(1, 1).real() == Approx(0.5).margin(1e-3));

    // no dissipation: every diagonal state is stationary
    CHECK_THROWS_AS(steady_state(Operator(q, Matrix::Zero(q.dim(), q.dim()), true), NoiseRates::none()), NumericalError);
}

TEST_CASE("adaptive underflow and csv export") {
    const HilbertSpace s{4, 2};
    const Matrix a = ladder(s, Mode::logical).matrix();
    const Operator h(s, 5.0 * (a + a.adjoint()), true);
    SolverConfig cfg;
    cfg.method = Method::rk45;
    cfg.rtol = 1e-15;
    cfg.atol = 1e-18;
    cfg.min_step = 0.5;
    CHECK_THROWS_AS(evolve(DensityMatrix::vacuum(s), h, NoiseRates::canonical(), cfg, 0.0, 10.0), NumericalError);

    SolverConfig fixed;
    fixed.dt = 1.0;
    const auto tr = evolve(DensityMatrix::vacuum(s), h, NoiseRates::canonical(), fixed, 0.0, 3.0,
                           {number(s, Mode::logical).matrix()});
    std::ostringstream os;
    write_csv(os, tr, {"n_a"});
    CHECK(os.str().rfind("time_ns,n_a\n0,0\n", 0) == 0);
    CHECK(tr.times.size() == 4);
    SolverConfig bad;
    bad.dt = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
