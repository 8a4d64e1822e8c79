#pragma once

// Lindblad master equation: right-hand side, fixed-step and adaptive time
// integration, and steady states.
//
//   dρ/dt = −i[H, ρ] + Σ_k D[L_k]ρ,   D[L]ρ = LρL† − ½L†Lρ − ½ρL†L
//
// Vectorization is column stacking: vec(AρB) = (Bᵀ ⊗ A) vec(ρ).

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <limits>
#include <ostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stimosc/dynamics_model.hpp"
#include "stimosc/errors.hpp"
#include "stimosc/operator_algebra.hpp"
#include "stimosc/units.hpp"

namespace stimosc::lindblad {

using dynamics::TimeDependentOperator;
using SparseMatrix = Eigen::SparseMatrix<cplx>;

struct NoiseRates {
    double kappa_a = units::khz_to_rad(35.2);  // rad/ns, energy decay of the logical mode
    double kappa_b = units::mhz_to_rad(0.5);
    double kappa_phi_a = 0.0;  // pure dephasing of the logical mode
    double n_thermal = 0.0;    // thermal occupation of the logical bath

    static NoiseRates canonical() { return {}; }
    static NoiseRates none() { return {0.0, 0.0, 0.0, 0.0}; }

    void validate() const {
        for (double v : {kappa_a, kappa_b, kappa_phi_a, n_thermal}) {
            if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("NoiseRates: rates must be finite and >= 0");
        }
    }
};

// Jump operators (rate folded in):
//   √(κ_a(1+n̄)) a,  √(κ_a n̄) a†,  √κ_b b,  √(2κ_φ) a†a.
// The dephasing normalization makes |n⟩⟨n′| decay at κ_φ(n − n′)².
inline std::vector<Matrix> collapse_operators(HilbertSpace space, const NoiseRates& rates) {
    rates.validate();
    std::vector<Matrix> out;
    const Matrix a = ladder(space, Mode::logical).matrix();
    const Matrix b = ladder(space, Mode::blockade).matrix();
    if (rates.kappa_a > 0.0) {
        out.push_back(std::sqrt(rates.kappa_a * (1.0 + rates.n_thermal)) * a);
        if (rates.n_thermal > 0.0) out.push_back(std::sqrt(rates.kappa_a * rates.n_thermal) * a.adjoint());
    }
    if (rates.kappa_b > 0.0) out.push_back(std::sqrt(rates.kappa_b) * b);
    if (rates.kappa_phi_a > 0.0) out.push_back(std::sqrt(2.0 * rates.kappa_phi_a) * number(space, Mode::logical).matrix());
    return out;
}

enum class Method { lawson_rk4, rk4, rk45 };

inline Method method_from_string(const std::string& s) {
    if (s == "lawson-rk4" || s == "lawson_rk4") return Method::lawson_rk4;
    if (s == "fixed-rk4" || s == "rk4") return Method::rk4;
    if (s == "adaptive-rk45" || s == "rk45") return Method::rk45;
    throw std::invalid_argument("unknown solver method '" + s + "'");
}

inline std::string to_string(Method m) {
    switch (m) {
        case Method::lawson_rk4: return "lawson-rk4";
        case Method::rk4: return "fixed-rk4";
        case Method::rk45: return "adaptive-rk45";
    }
    return "unknown";
}

struct SolverConfig {
    Method method = Method::lawson_rk4;
    double dt = 0.5;           // ns, macro step / recording grid spacing
    double step_safety = 50.0; // fixed-step internal step ≤ 1/(step_safety · explicit spectral scale)
    double rtol = 1e-8;        // rk45
    double atol = 1e-10;       // rk45
    double max_step = 5.0;     // ns, rk45
    double min_step = 1e-7;    // ns, rk45 underflow threshold
    int record_stride = 1;     // record every n-th macro step (final time always recorded)
    bool check_health = true;  // eigen-decompose recorded states

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("SolverConfig: dt must be > 0");
        if (!(step_safety > 0.0)) throw std::invalid_argument("SolverConfig: step_safety must be > 0");
        if (record_stride < 1) throw std::invalid_argument("SolverConfig: record_stride must be >= 1");
        if (method == Method::rk45 && !(rtol > 0.0 && atol > 0.0 && max_step > 0.0 && min_step > 0.0)) {
            throw std::invalid_argument("SolverConfig: adaptive tolerances must be > 0");
        }
    }
};

struct Health {
    double duration_us = 0.0;
    double max_trace_error = 0.0;
    double max_hermiticity_error = 0.0;
    double min_eigenvalue = 0.0;

    void absorb(const StateHealth& h) {
        max_trace_error = std::max(max_trace_error, h.trace_error);
        max_hermiticity_error = std::max(max_hermiticity_error, h.hermiticity_error);
        min_eigenvalue = std::min(min_eigenvalue, h.min_eigenvalue);
    }
    void absorb(const Health& h) {
        duration_us = std::max(duration_us, h.duration_us);
        max_trace_error = std::max(max_trace_error, h.max_trace_error);
        max_hermiticity_error = std::max(max_hermiticity_error, h.max_hermiticity_error);
        min_eigenvalue = std::min(min_eigenvalue, h.min_eigenvalue);
    }

    // Trace 1e-8 and hermiticity 1e-9 per simulated μs; eigenvalues above −1e-8.
    bool ok() const {
        const double scale = std::max(1.0, duration_us);
        return max_trace_error < 1e-8 * scale && max_hermiticity_error < 1e-9 * scale && min_eigenvalue > -1e-8;
    }
};

struct Trajectory {
    std::vector<double> times;
    std::vector<std::vector<cplx>> expectations;  // [observable][record]
    std::vector<Matrix> states;                    // when requested
    Matrix final_state;
    HilbertSpace space;
    Health health;
    long steps = 0;

    std::vector<double> real(std::size_t observable) const {
        std::vector<double> out;
        for (const auto& v : expectations.at(observable)) out.push_back(v.real());
        return out;
    }
    DensityMatrix final_density(StateTolerance tol = {1e-7, 1e-8, -1e-7}) const { return {space, final_state, tol}; }
};

namespace detail {

inline SparseMatrix to_sparse(const Matrix& m) {
    std::vector<Eigen::Triplet<cplx>> trip;
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (m(i, j) != cplx(0.0, 0.0)) trip.emplace_back(i, j, m(i, j));
    SparseMatrix s(m.rows(), m.cols());
    s.setFromTriplets(trip.begin(), trip.end());
    s.makeCompressed();
    return s;
}

inline double spectral_radius_hermitian(const Matrix& h) {
    if (h.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace detail

// Prepared generator for one Hamiltonian and set of jump operators.
class Generator {
public:
    Generator(const TimeDependentOperator& h, std::vector<Matrix> jumps, bool integrating_factor)
        : space_(h.space), dim_(h.space.dim()) {
        Matrix loss = Matrix::Zero(dim_, dim_);
        for (const auto& l : jumps) {
            loss += l.adjoint() * l;
            jumps_.push_back(detail::to_sparse(l));
        }
        const cplx minus_i(0.0, -1.0);
        heff_ = detail::to_sparse(minus_i * h.constant - 0.5 * loss);  // −iH₀ − ½ΣL†L
        for (const auto& term : h.terms) {
            terms_.push_back(detail::to_sparse(minus_i * term.op));
            coeffs_.push_back(term.coeff);
        }
        lambda_ = Matrix::Zero(dim_, dim_);
        Matrix explicit_h = h.constant;
        if (integrating_factor) {
            for (int m = 0; m < dim_; ++m)
                for (int n = 0; n < dim_; ++n) {
                    cplx v = minus_i * (h.constant(m, m) - h.constant(n, n)).real() - 0.5 * (loss(m, m) + loss(n, n));
                    for (const auto& l : jumps) v += l(m, m) * std::conj(l(n, n));
                    lambda_(m, n) = v;
                }
            explicit_h.diagonal().setZero();
        }
        // Spectral scale of the explicitly integrated part: unitary piece
        // plus the dissipative rates, with envelopes at their peak.
        scale_ = detail::spectral_radius_hermitian(explicit_h);
        for (const auto& term : h.terms) term_norms_.push_back(detail::spectral_radius_hermitian(term.op));
        double jump_scale = 0.0;
        for (const auto& l : jumps) jump_scale += l.cwiseAbs2().colwise().sum().maxCoeff();
        loss_scale_ = jump_scale;
        if (integrating_factor) {
            // Interaction-frame rotation left in the explicit part: off-diagonal
            // Hamiltonian elements turn at E_m − E_n, jump terms at the spread
            // of E_m − E_k over their nonzero entries.
            const Eigen::VectorXd e = h.constant.diagonal().real();
            auto spread = [&](const Matrix& op, bool hamiltonian) {
                double lo = INFINITY, hi = -INFINITY, top = 0.0;
                for (int m = 0; m < dim_; ++m)
                    for (int k = 0; k < dim_; ++k) {
                        if (std::abs(op(m, k)) < 1e-14 || (hamiltonian && m == k)) continue;
                        const double w = e(m) - e(k);
                        lo = std::min(lo, w);
                        hi = std::max(hi, w);
                        top = std::max(top, std::abs(w));
                    }
                if (!(hi >= lo)) return 0.0;
                return hamiltonian ? top : hi - lo;
            };
            rotation_ = spread(explicit_h, true);
            for (const auto& term : h.terms) rotation_ = std::max(rotation_, spread(term.op, true));
            for (const auto& l : jumps) rotation_ = std::max(rotation_, spread(l, false));
        }
    }

    const HilbertSpace& space() const noexcept { return space_; }
    const Matrix& lambda() const noexcept { return lambda_; }

    // Upper bound of the explicit spectral scale over [t0, t1].
    double explicit_scale(double t0, double t1) const {
        double s = scale_ + loss_scale_ + 0.1 * rotation_;
        for (std::size_t k = 0; k < coeffs_.size(); ++k) {
            double peak = 0.0;
            const int samples = 512;
            for (int i = 0; i <= samples; ++i) peak = std::max(peak, std::abs(coeffs_[k](t0 + (t1 - t0) * i / samples)));
            s += peak * term_norms_[k];
        }
        return s;
    }

    // Full right-hand side. ρ is assumed hermitian: RHS = Z + Z† + ΣLρL†, Z = (−iH − ½ΣL†L)ρ.
    Matrix operator()(double t, const Matrix& rho) const {
        Matrix z = heff_ * rho;
        for (std::size_t k = 0; k < terms_.size(); ++k) {
            const double c = coeffs_[k](t);
            if (c != 0.0) z.noalias() += c * (terms_[k] * rho);
        }
        Matrix out = z + z.adjoint();
        for (const auto& l : jumps_) {
            const Matrix lr = l * rho;                // Lρ
            out.noalias() += l * Matrix(lr.adjoint());  // L(Lρ)† = LρL†
        }
        return out;
    }

    // Part not covered by the integrating factor.
    Matrix nonlinear(double t, const Matrix& rho) const { return (*this)(t, rho) - lambda_.cwiseProduct(rho); }

private:
    HilbertSpace space_;
    int dim_;
    SparseMatrix heff_;
    std::vector<SparseMatrix> terms_;
    std::vector<std::function<double(double)>> coeffs_;
    std::vector<SparseMatrix> jumps_;
    Matrix lambda_;
    double scale_ = 0.0;
    double loss_scale_ = 0.0;
    double rotation_ = 0.0;
    std::vector<double> term_norms_;
};

// −i[H, ρ] + Σ D[L]ρ for a static Hamiltonian.
inline Matrix rhs(const DensityMatrix& rho, const Operator& h, const NoiseRates& rates) {
    if (!(rho.space() == h.space())) throw std::invalid_argument("rhs: density matrix and Hamiltonian spaces differ");
    const Generator gen(TimeDependentOperator(h), collapse_operators(h.space(), rates), false);
    return gen(0.0, rho.matrix());
}

namespace detail {

class Recorder {
public:
    Recorder(Trajectory& tr, const std::vector<Matrix>& obs, bool store, bool health)
        : tr_(tr), obs_(obs), store_(store), health_(health) {
        tr_.expectations.assign(obs.size(), {});
    }
    void operator()(double t, const Matrix& rho) {
        tr_.times.push_back(t);
        for (std::size_t k = 0; k < obs_.size(); ++k) {
            tr_.expectations[k].push_back(rho.transpose().cwiseProduct(obs_[k]).sum());
        }
        if (store_) tr_.states.push_back(rho);
        if (health_) {
            tr_.health.absorb(state_health(rho));
        } else {
            StateHealth h;
            h.trace_error = std::abs(rho.trace() - cplx(1.0, 0.0));
            h.hermiticity_error = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
            tr_.health.absorb(h);
        }
    }

private:
    Trajectory& tr_;
    const std::vector<Matrix>& obs_;
    bool store_;
    bool health_;
};

}  // namespace detail

// Integrate from t0 to t1. Observables are recorded as Tr(ρO) on the dt grid
// (every record_stride steps) and at t1.
inline Trajectory evolve(const DensityMatrix& rho0, const TimeDependentOperator& h, const NoiseRates& rates,
                         const SolverConfig& config, double t0, double t1, const std::vector<Matrix>& observables = {},
                         bool store_states = false) {
    config.validate();
    if (!(rho0.space() == h.space)) throw std::invalid_argument("evolve: initial state and Hamiltonian spaces differ");
    if (!(t1 >= t0)) throw std::invalid_argument("evolve: t1 must be >= t0");
    for (const auto& o : observables) {
        if (o.rows() != rho0.dim()) throw std::invalid_argument("evolve: observable dimension mismatch");
    }
    const bool lawson = config.method == Method::lawson_rk4;
    const Generator gen(h, collapse_operators(h.space, rates), lawson);

    Trajectory tr;
    tr.space = h.space;
    tr.health.duration_us = (t1 - t0) * 1e-3;
    tr.health.min_eigenvalue = 0.0;
    detail::Recorder record(tr, observables, store_states, config.check_health);
    Matrix rho = rho0.matrix();
    record(t0, rho);

    const double span = t1 - t0;
    const long macro = span > 0.0 ? static_cast<long>(std::ceil(span / config.dt - 1e-9)) : 0;

    if (config.method == Method::rk45) {
        // Dormand–Prince 5(4), steps clipped to the dt recording grid.
        static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        static constexpr double a21 = 1.0 / 5;
        static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
        static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                                a65 = -5103.0 / 18656;
        static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                                b6 = 11.0 / 84;
        static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                                e6 = 22.0 / 525, e7 = -1.0 / 40;
        double t = t0;
        double step = std::min(config.dt, config.max_step);
        Matrix k1 = gen(t, rho);
        for (long m = 1; m <= macro; ++m) {
            const double target = std::min(t0 + m * config.dt, t1);
            while (t < target - 1e-12) {
                step = std::min({step, config.max_step, target - t});
                const Matrix k2 = gen(t + c2 * step, rho + step * a21 * k1);
                const Matrix k3 = gen(t + c3 * step, rho + step * (a31 * k1 + a32 * k2));
                const Matrix k4 = gen(t + c4 * step, rho + step * (a41 * k1 + a42 * k2 + a43 * k3));
                const Matrix k5 = gen(t + c5 * step, rho + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
                const Matrix k6 =
                    gen(t + step, rho + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
                const Matrix next = rho + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
                const Matrix k7 = gen(t + step, next);
                const Matrix err = step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
                const double scale = config.atol + config.rtol * std::max(rho.cwiseAbs().maxCoeff(), next.cwiseAbs().maxCoeff());
                const double norm = err.cwiseAbs().maxCoeff() / scale;
                if (norm <= 1.0) {
                    t += step;
                    rho = next;
                    k1 = k7;
                    ++tr.steps;
                }
                const double factor = norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
                step *= factor;
                if (step < config.min_step && t < target - 1e-12) {
                    std::ostringstream msg;
                    msg << "evolve: adaptive step underflow (h = " << step << " ns) at t = " << t << " ns";
                    throw NumericalError(msg.str());
                }
            }
            if (m % config.record_stride == 0 || m == macro) record(target, rho);
        }
        tr.final_state = rho;
        return tr;
    }

    // Fixed-step methods with internal sub-steps honoring the stability bound.
    const double scale = gen.explicit_scale(t0, t1);
    const Matrix& lambda = gen.lambda();
    Matrix e_half, e_full;
    double cached_h = -1.0;
    double t = t0;
    for (long m = 1; m <= macro; ++m) {
        const double target = std::min(t0 + m * config.dt, t1);
        const double macro_h = target - t;
        const long sub = std::max<long>(1, static_cast<long>(std::ceil(macro_h * config.step_safety * scale - 1e-9)));
        const double hs = macro_h / sub;
        if (lawson && std::abs(hs - cached_h) > 1e-15 * std::max(1.0, hs)) {
            e_half = (lambda * (0.5 * hs)).array().exp().matrix();
            e_full = e_half.cwiseProduct(e_half);
            cached_h = hs;
        }
        const double t_macro = t;
        for (long s = 0; s < sub; ++s) {
            t = t_macro + s * hs;
            const double t_next = s + 1 == sub ? target : t_macro + (s + 1) * hs;
            if (lawson) {
                const Matrix k1 = gen.nonlinear(t, rho);
                const Matrix e_rho = e_half.cwiseProduct(rho);
                const Matrix k2 = gen.nonlinear(t + hs / 2, e_half.cwiseProduct(rho + (hs / 2) * k1));
                const Matrix k3 = gen.nonlinear(t + hs / 2, e_rho + (hs / 2) * k2);
                const Matrix ee_rho = e_half.cwiseProduct(e_rho);
                const Matrix k4 = gen.nonlinear(t_next, ee_rho + hs * e_half.cwiseProduct(k3));
                rho = ee_rho + (hs / 6) * (e_full.cwiseProduct(k1) + 2.0 * e_half.cwiseProduct(k2 + k3) + k4);
            } else {
                const Matrix k1 = gen(t, rho);
                const Matrix k2 = gen(t + hs / 2, rho + (hs / 2) * k1);
                const Matrix k3 = gen(t + hs / 2, rho + (hs / 2) * k2);
                const Matrix k4 = gen(t_next, rho + hs * k3);
                rho += (hs / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            ++tr.steps;
        }
        t = target;
        if (m % config.record_stride == 0 || m == macro) record(target, rho);
    }
    tr.final_state = rho;
    return tr;
}

inline Trajectory evolve(const DensityMatrix& rho0, const Operator& h, const NoiseRates& rates,
                         const SolverConfig& config, double t0, double t1, const std::vector<Matrix>& observables = {},
                         bool store_states = false) {
    return evolve(rho0, TimeDependentOperator(h), rates, config, t0, t1, observables, store_states);
}

// Column-stacked Liouvillian superoperator of a static Hamiltonian.
inline Matrix liouvillian_superoperator(const Matrix& h, const std::vector<Matrix>& jumps) {
    const auto d = h.rows();
    const Matrix id = Matrix::Identity(d, d);
    const cplx minus_i(0.0, -1.0);
    Matrix l = minus_i * (kron(id, h) - kron(h.transpose(), id));
    for (const auto& j : jumps) {
        const Matrix jdj = j.adjoint() * j;
        l += kron(j.conjugate(), j) - 0.5 * kron(id, jdj) - 0.5 * kron(jdj.transpose(), id);
    }
    return l;
}

// Populations decouple from coherences when H is diagonal and every jump
// operator maps Fock states to Fock states. The rate matrix of that closed
// sector is returned, or nothing when the conditions fail.
inline std::optional<Eigen::MatrixXd> population_rate_matrix(const Operator& h, const NoiseRates& rates,
                                                             double tol = 1e-14) {
    const Matrix& hm = h.matrix();
    const auto d = hm.rows();
    if ((hm - Matrix(hm.diagonal().asDiagonal())).cwiseAbs().maxCoeff() > tol) return std::nullopt;
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d, d);
    for (const auto& l : collapse_operators(h.space(), rates)) {
        for (Eigen::Index k = 0; k < d; ++k) {
            int nonzero = 0;
            for (Eigen::Index m = 0; m < d; ++m) {
                if (std::abs(l(m, k)) <= tol) continue;
                ++nonzero;
                w(m, k) += std::norm(l(m, k));
                w(k, k) -= std::norm(l(m, k));
            }
            if (nonzero > 1) return std::nullopt;
        }
    }
    return w;
}

// Exact propagation of a static generator: ρ(t) = exp(L t) ρ(0) via the
// superoperator exponential. Intended for small spaces (d² ≲ 1000).
class StaticPropagator {
public:
    StaticPropagator(const Operator& h, const NoiseRates& rates)
        : space_(h.space()), generator_(liouvillian_superoperator(h.matrix(), collapse_operators(h.space(), rates))) {}

    const HilbertSpace& space() const noexcept { return space_; }

    Matrix apply(const Matrix& rho, double t) const {
        if (t == 0.0) return rho;
        return apply_superoperator(map(t), rho);
    }

    Matrix map(double t) const { return (generator_ * t).exp(); }

    static Matrix apply_superoperator(const Matrix& sup, const Matrix& rho) {
        const auto d = rho.rows();
        const Vector v = sup * Eigen::Map<const Vector>(rho.data(), d * d);
        Matrix out = Eigen::Map<const Matrix>(v.data(), d, d);
        return 0.5 * (out + out.adjoint());
    }

private:
    HilbertSpace space_;
    Matrix generator_;
};

struct SteadyStateInfo {
    double residual = 0.0;           // ‖L(ρ)‖ (max elementwise)
    double min_pivot = 0.0;          // smallest |R_ii| of the pivoted QR
};

// Null vector of the Liouvillian with the trace condition appended as an
// extra row, solved in the least-squares sense by column-pivoted QR.
inline DensityMatrix steady_state(const Operator& h, const NoiseRates& rates, SteadyStateInfo* info = nullptr) {
    const HilbertSpace s = h.space();
    const auto jumps = collapse_operators(s, rates);
    const Matrix l = liouvillian_superoperator(h.matrix(), jumps);
    const auto n = l.rows();
    const int d = s.dim();
    Matrix aug(n + 1, n);
    aug.topRows(n) = l;
    aug.row(n).setZero();
    for (int i = 0; i < d; ++i) aug(n, i * d + i) = 1.0;  // Tr ρ
    Vector rhs_vec = Vector::Zero(n + 1);
    rhs_vec(n) = 1.0;

    Eigen::ColPivHouseholderQR<Matrix> qr(aug);
    const Vector r_diag = qr.matrixQR().diagonal();
    const double min_pivot = r_diag.cwiseAbs().minCoeff();
    if (min_pivot < 1e-8) {
        std::ostringstream msg;
        msg << "steady_state: Liouvillian null space is degenerate (min pivot " << min_pivot << ")";
        throw NumericalError(msg.str());
    }
    const Vector x = qr.solve(rhs_vec);
    Matrix rho(d, d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i) rho(i, j) = x(j * d + i);
    rho = 0.5 * (rho + rho.adjoint()).eval();
    rho /= rho.trace();
    const Vector vec_rho = Eigen::Map<const Vector>(rho.data(), n);
    const double residual = (l * vec_rho).cwiseAbs().maxCoeff();
    if (info) *info = {residual, min_pivot};
    if (residual > 1e-10) {
        std::ostringstream msg;
        msg << "steady_state: residual " << residual << " exceeds 1e-10";
        throw NumericalError(msg.str());
    }
    return {s, rho, StateTolerance{1e-9, 1e-10, -1e-8}};
}

// Error ratio |f(h) − f(h/2)| / |f(h/2) − f(h/4)| of a recorded-observable
// vector: ≈ 16 for a fourth-order method.
inline double convergence_ratio(const std::function<std::vector<double>(double)>& run, double dt) {
    const auto f1 = run(dt), f2 = run(dt / 2), f4 = run(dt / 4);
    double e12 = 0.0, e24 = 0.0;
    for (std::size_t i = 0; i < f1.size(); ++i) {
        e12 = std::max(e12, std::abs(f1[i] - f2[i]));
        e24 = std::max(e24, std::abs(f2[i] - f4[i]));
    }
    return e12 / e24;
}

inline void write_csv(std::ostream& os, const Trajectory& tr, const std::vector<std::string>& names) {
    os << "time_ns";
    for (const auto& n : names) os << ',' << n;
    os << '\n' << std::setprecision(12);
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        os << tr.times[i];
        for (std::size_t k = 0; k < names.size() && k < tr.expectations.size(); ++k) {
            os << ',' << tr.expectations[k][i].real();
        }
        os << '\n';
    }
}

}  // namespace stimosc::lindblad
