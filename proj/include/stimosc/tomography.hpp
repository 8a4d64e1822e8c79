#pragma once

// Wigner tomography of the logical mode: number-resolved readout through the
// cross-Kerr shifted blockade response, Poisson calibration of the
// displacement amplitude, displaced-parity maps, linear least-squares
// reconstruction and state fidelity.
//
// Conventions: P = Σ(−1)^n |n⟩⟨n|, W(α) = (2/π) Tr(ρ D(α) P D(α)†), so
// W(0) = 2/π for vacuum and |W| ≤ 2/π.

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stimosc/dynamics_model.hpp"
#include "stimosc/errors.hpp"
#include "stimosc/fitting.hpp"
#include "stimosc/lindblad.hpp"
#include "stimosc/operator_algebra.hpp"
#include "stimosc/parallel.hpp"
#include "stimosc/pulses.hpp"
#include "stimosc/units.hpp"

namespace stimosc::tomography {

inline constexpr double wigner_max = 2.0 / M_PI;

// ---- readout ------------------------------------------------------------

struct ReadoutModel {
    bool ideal = true;
    double chi_ab = units::mhz_to_rad(-16.16);
    double kappa_a = units::khz_to_rad(35.2);
    double kappa_b = units::mhz_to_rad(0.5);

    static ReadoutModel exact() { return {}; }
    static ReadoutModel selective(double chi_ab, double kappa_a, double kappa_b) {
        return {false, chi_ab, kappa_a, kappa_b};
    }

    bool dispersive() const { return std::abs(chi_ab) > std::max(kappa_a, kappa_b); }
};

// Relative blockade response at ω_b − nχ_ab from photon number m: overlap of
// two Lorentzians of FWHM κ_b, normalized to 1 at m = n.
inline double selectivity(int n, int m, const ReadoutModel& r) {
    if (r.ideal) return n == m ? 1.0 : 0.0;
    const double d = (n - m) * r.chi_ab;
    return r.kappa_b * r.kappa_b / (d * d + r.kappa_b * r.kappa_b);
}

namespace detail {

inline void check_dispersive(const ReadoutModel& r) {
    if (!r.ideal && !r.dispersive()) {
        Warnings::emit("number_resolved_readout: |chi_ab| does not exceed kappa_a, kappa_b; photon-number peaks overlap");
    }
}

inline void check_single_mode(const Matrix& rho) {
    if (rho.rows() != rho.cols() || rho.rows() < 1) throw std::invalid_argument("tomography: square single-mode ρ expected");
}

}  // namespace detail

// Normalized readout signal for photon number n of a single-mode ρ.
inline double number_resolved_readout(const Matrix& rho_a, int n, const ReadoutModel& r = {}) {
    detail::check_single_mode(rho_a);
    if (n < 0) throw std::invalid_argument("number_resolved_readout: n must be >= 0");
    detail::check_dispersive(r);
    const int dim = static_cast<int>(rho_a.rows());
    if (r.ideal) return n < dim ? rho_a(n, n).real() : 0.0;
    double p = 0.0;
    for (int m = 0; m < dim; ++m) p += selectivity(n, m, r) * rho_a(m, m).real();
    return p;
}

inline double number_resolved_readout(const DensityMatrix& rho, int n, const ReadoutModel& r = {}) {
    return number_resolved_readout(rho.reduced_logical(), n, r);
}

// All readout channels 0..dim−1 at once (no dispersive-condition warning).
inline std::vector<double> readout_distribution(const Matrix& rho_a, const ReadoutModel& r = {}) {
    detail::check_single_mode(rho_a);
    const int dim = static_cast<int>(rho_a.rows());
    std::vector<double> p(dim, 0.0);
    for (int n = 0; n < dim; ++n) {
        if (r.ideal) {
            p[n] = rho_a(n, n).real();
            continue;
        }
        for (int m = 0; m < dim; ++m) p[n] += selectivity(n, m, r) * rho_a(m, m).real();
    }
    return p;
}

// ---- Poisson calibration ---------------------------------------------------

struct PoissonCalibration {
    double scale = 0.0;  // |α| per instrument unit
    double scale_error = 0.0;
    std::vector<double> norms;  // voltage per unit probability, n = 0..N−1
    std::vector<double> norm_errors;
    double residual_norm = 0.0;

    double alpha(double instrument) const { return scale * instrument; }
    double normalized(int n, double voltage) const { return voltage / norms.at(n); }
};

inline double poisson_weight(int n, double mean) {
    if (mean <= 0.0) return n == 0 ? 1.0 : 0.0;
    return std::exp(-mean + n * std::log(mean) - std::lgamma(n + 1.0));
}

// Fits V_n(u) = c_n · e^{−(su)²}(su)^{2n}/n! to number-selective voltages
// measured after displacing vacuum by instrument amplitudes u.
// voltages[n][i] belongs to amplitudes[i].
inline PoissonCalibration poisson_calibrate(const std::vector<double>& amplitudes,
                                            const std::vector<std::vector<double>>& voltages) {
    const std::size_t m = amplitudes.size();
    const std::size_t levels = voltages.size();
    if (levels < 1 || m < levels + 2) throw std::invalid_argument("poisson_calibrate: need more amplitudes than parameters");
    for (const auto& row : voltages) {
        if (row.size() != m) throw std::invalid_argument("poisson_calibrate: voltage rows must match amplitudes");
    }
    const auto [vmin, vmax] = std::minmax_element(voltages[0].begin(), voltages[0].end());
    const double u_max = *std::max_element(amplitudes.begin(), amplitudes.end(),
                                           [](double x, double y) { return std::abs(x) < std::abs(y); });
    if (!(*vmax - *vmin > 1e-6 * std::max(1e-300, std::abs(*vmax))) || u_max == 0.0) {
        throw NumericalError("poisson_calibrate: flat vacuum response, scale is undetermined");
    }

    // Starting point: c₀ from the largest vacuum signal, s from its 1/e point.
    const double c0 = *vmax;
    double s0 = 1.0 / std::abs(u_max);
    for (std::size_t i = 0; i < m; ++i) {
        if (voltages[0][i] < c0 / std::exp(1.0) && amplitudes[i] != 0.0) {
            s0 = 1.0 / std::abs(amplitudes[i]);
            break;
        }
    }
    Eigen::VectorXd p0(1 + levels);
    p0(0) = s0;
    for (std::size_t n = 0; n < levels; ++n) p0(1 + n) = c0;

    fit::ResidualFn fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        for (std::size_t n = 0; n < levels; ++n)
            for (std::size_t i = 0; i < m; ++i) {
                const double mean = std::pow(p(0) * amplitudes[i], 2);
                r(n * m + i) = p(1 + n) * poisson_weight(static_cast<int>(n), mean) - voltages[n][i];
            }
    };
    const auto res = fit::least_squares(fn, static_cast<int>(levels * m), p0);
    PoissonCalibration out;
    out.scale = std::abs(res.params(0));
    out.scale_error = res.errors(0);
    for (std::size_t n = 0; n < levels; ++n) {
        out.norms.push_back(res.params(1 + n));
        out.norm_errors.push_back(res.errors(1 + n));
    }
    out.residual_norm = res.residual_norm;
    if (!(out.scale > 0.0) || !res.params.allFinite()) throw NumericalError("poisson_calibrate: fit did not converge");
    return out;
}

// ---- Wigner function -------------------------------------------------------

inline constexpr int default_work_dim = 40;

namespace detail {

inline Matrix pad(const Matrix& rho, int dim) {
    if (rho.rows() >= dim) return rho;
    Matrix out = Matrix::Zero(dim, dim);
    out.topLeftCorner(rho.rows(), rho.cols()) = rho;
    return out;
}

inline int working_dim(const Matrix& rho, int work_dim) { return std::max<int>(static_cast<int>(rho.rows()), work_dim); }

inline void check_alpha(int dim, cplx alpha) {
    if (!displacement_is_truncation_safe(dim, alpha)) {
        std::ostringstream msg;
        msg << "wigner: |alpha|^2 = " << std::norm(alpha) << " exceeds the truncation-safe bound " << dim / 4.0;
        Warnings::emit(msg.str());
    }
}

// D(α) P D(α)† in a dim-level space.
inline Matrix displaced_parity(int dim, cplx alpha) {
    const Matrix d = fock::displacement(dim, alpha);
    return d * fock::parity(dim) * d.adjoint();
}

}  // namespace detail

// Operator path: (2/π) Tr(ρ D(α) P D(α)†).
inline double wigner_point_direct(const Matrix& rho_a, cplx alpha, int work_dim = default_work_dim) {
    detail::check_single_mode(rho_a);
    const int dim = detail::working_dim(rho_a, work_dim);
    detail::check_alpha(dim, alpha);
    const Matrix rho = detail::pad(rho_a, dim);
    return wigner_max * (rho * detail::displaced_parity(dim, alpha)).trace().real();
}

namespace detail {

inline double displaced_parity_readout(const Matrix& rho_padded, cplx alpha, const ReadoutModel& readout) {
    const int dim = static_cast<int>(rho_padded.rows());
    const Matrix d = fock::displacement(dim, -alpha);
    const auto p = readout_distribution(d * rho_padded * d.adjoint(), readout);
    double parity = 0.0;
    for (int n = 0; n < dim; ++n) parity += (n % 2 == 0 ? 1.0 : -1.0) * p[n];
    return wigner_max * parity;
}

}  // namespace detail

// Measurement path: displace by −α, read photon numbers, sum with parity signs.
inline double wigner_point(const Matrix& rho_a, cplx alpha, const ReadoutModel& readout = {},
                           int work_dim = default_work_dim) {
    detail::check_single_mode(rho_a);
    const int dim = detail::working_dim(rho_a, work_dim);
    detail::check_alpha(dim, alpha);
    detail::check_dispersive(readout);
    return detail::displaced_parity_readout(detail::pad(rho_a, dim), alpha, readout);
}

struct WignerGrid {
    std::vector<double> re;
    std::vector<double> im;

    static WignerGrid square(double radius = 2.0, int points = 21) {
        if (points < 2 || !(radius > 0.0)) throw std::invalid_argument("WignerGrid: need >= 2 points and radius > 0");
        WignerGrid g;
        for (int i = 0; i < points; ++i) {
            const double v = -radius + 2.0 * radius * i / (points - 1);
            g.re.push_back(v);
            g.im.push_back(v);
        }
        return g;
    }

    std::size_t size() const { return re.size() * im.size(); }
    // Row-major with the real part fastest.
    cplx alpha(std::size_t k) const { return {re[k % re.size()], im[k / re.size()]}; }
    double max_radius() const {
        double r = 0.0;
        for (double x : re)
            for (double y : im) r = std::max(r, std::hypot(x, y));
        return r;
    }
};

struct WignerMap {
    WignerGrid grid;
    std::vector<double> values;  // same ordering as WignerGrid::alpha
    std::string label;

    double max_abs() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
    double at(std::size_t i_re, std::size_t i_im) const { return values.at(i_im * grid.re.size() + i_re); }

    // Riemann sum over the grid cells inside |α| ≤ radius.
    double integral(double radius) const {
        if (grid.re.size() < 2 || grid.im.size() < 2) return 0.0;
        const double dx = grid.re[1] - grid.re[0], dy = grid.im[1] - grid.im[0];
        double sum = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k)
            if (std::abs(grid.alpha(k)) <= radius) sum += values[k];
        return sum * dx * dy;
    }

    void write_csv(std::ostream& os) const {
        os << "re_alpha,im_alpha,W\n";
        os << std::setprecision(12);
        for (std::size_t k = 0; k < values.size(); ++k) {
            const cplx a = grid.alpha(k);
            os << a.real() << ',' << a.imag() << ',' << values[k] << '\n';
        }
    }
};

inline WignerMap wigner_map(const Matrix& rho_a, const WignerGrid& grid, const ReadoutModel& readout = {},
                            std::string label = {}, unsigned jobs = 1, int work_dim = default_work_dim) {
    detail::check_single_mode(rho_a);
    const int dim = detail::working_dim(rho_a, work_dim);
    detail::check_alpha(dim, grid.max_radius());
    detail::check_dispersive(readout);
    const Matrix rho = detail::pad(rho_a, dim);
    WignerMap map{grid, std::vector<double>(grid.size()), std::move(label)};
    parallel_for(grid.size(), jobs,
                 [&](std::size_t k) { map.values[k] = detail::displaced_parity_readout(rho, grid.alpha(k), readout); });
    return map;
}

// ---- reconstruction --------------------------------------------------------

inline double fidelity(const Matrix& rho, const Vector& target) {
    if (rho.rows() != rho.cols() || rho.rows() != target.size()) throw std::invalid_argument("fidelity: dimension mismatch");
    const double norm = target.squaredNorm();
    if (!(norm > 0.0)) throw std::invalid_argument("fidelity: zero target vector");
    return (target.adjoint() * rho * target)(0, 0).real() / norm;
}

// Target padded or truncated to the dimension of ρ.
inline double fidelity_padded(const Matrix& rho, const Vector& target) {
    Vector t = Vector::Zero(rho.rows());
    const auto n = std::min<Eigen::Index>(rho.rows(), target.size());
    t.head(n) = target.head(n);
    return fidelity(rho, t);
}

struct ReconstructedState {
    Matrix rho;                    // physical, n_rec × n_rec
    Matrix raw;                    // hermitian least-squares estimate before projection
    double residual_norm = 0.0;    // ‖Aθ − W‖₂ of the linear fit
    double clipped_weight = 0.0;   // sum of negative eigenvalues removed
    std::vector<double> eigenvalues;
    double fidelity = std::numeric_limits<double>::quiet_NaN();
    std::string label;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["label"] = label;
        j["n_rec"] = rho.rows();
        std::vector<double> re, im;
        for (Eigen::Index r = 0; r < rho.rows(); ++r)
            for (Eigen::Index c = 0; c < rho.cols(); ++c) {
                re.push_back(rho(r, c).real());
                im.push_back(rho(r, c).imag());
            }
        j["rho_real"] = re;
        j["rho_imag"] = im;
        j["residual_norm"] = residual_norm;
        j["clipped_weight"] = clipped_weight;
        j["eigenvalues"] = eigenvalues;
        if (std::isfinite(fidelity)) j["fidelity"] = fidelity;
        return j;
    }
};

namespace detail {

// Hermitian basis for n×n matrices: E_kk, (E_jk + E_kj)/√2, i(E_jk − E_kj)/√2.
struct BasisElement {
    Matrix m;
    std::string name;
};

inline std::vector<BasisElement> hermitian_basis(int n) {
    std::vector<BasisElement> out;
    const double s = 1.0 / std::sqrt(2.0);
    for (int k = 0; k < n; ++k) {
        Matrix e = Matrix::Zero(n, n);
        e(k, k) = 1.0;
        out.push_back({e, "rho_" + std::to_string(k) + std::to_string(k)});
    }
    for (int j = 0; j < n; ++j)
        for (int k = j + 1; k < n; ++k) {
            Matrix re = Matrix::Zero(n, n), im = Matrix::Zero(n, n);
            re(j, k) = re(k, j) = s;
            im(j, k) = cplx(0.0, s);
            im(k, j) = cplx(0.0, -s);
            const std::string tag = std::to_string(j) + std::to_string(k);
            out.push_back({re, "Re rho_" + tag});
            out.push_back({im, "Im rho_" + tag});
        }
    return out;
}

inline Matrix project_physical(const Matrix& raw, double* clipped, std::vector<double>* eigs) {
    const Matrix h = 0.5 * (raw + raw.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    Eigen::VectorXd ev = es.eigenvalues();
    double neg = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev(i) < 0.0) {
            neg += ev(i);
            ev(i) = 0.0;
        }
    const double tr = ev.sum();
    if (!(tr > 0.0)) throw NumericalError("reconstruct: no positive weight left after clipping");
    ev /= tr;
    if (clipped) *clipped = neg;
    if (eigs) *eigs = std::vector<double>(ev.data(), ev.data() + ev.size());
    return es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace detail

// Linear least-squares inversion of a Wigner map onto n_rec × n_rec density
// matrices, then projection onto the nearest physical state.
inline ReconstructedState reconstruct(const WignerMap& map, int n_rec = 4, int work_dim = default_work_dim) {
    if (n_rec < 1) throw std::invalid_argument("reconstruct: n_rec must be >= 1");
    const auto basis = detail::hermitian_basis(n_rec);
    const auto n_par = static_cast<Eigen::Index>(basis.size());
    const auto n_pts = static_cast<Eigen::Index>(map.values.size());
    if (n_pts < n_par) {
        throw std::invalid_argument("reconstruct: grid has " + std::to_string(n_pts) + " points, need >= " +
                                    std::to_string(n_par));
    }
    const int dim = std::max(work_dim, n_rec);
    Eigen::MatrixXd a(n_pts, n_par);
    Eigen::VectorXd w(n_pts);
    for (Eigen::Index k = 0; k < n_pts; ++k) {
        const Matrix pi = detail::displaced_parity(dim, map.grid.alpha(k)).topLeftCorner(n_rec, n_rec);
        for (Eigen::Index b = 0; b < n_par; ++b) a(k, b) = wigner_max * (basis[b].m * pi).trace().real();
        w(k) = map.values[k];
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv(n_par - 1) < 1e-10 * sv(0)) {
        const Eigen::VectorXd null = svd.matrixV().col(n_par - 1);
        Eigen::Index worst = 0;
        null.cwiseAbs().maxCoeff(&worst);
        std::ostringstream msg;
        msg << "reconstruct: design matrix is rank-deficient (condition " << sv(0) / std::max(sv(n_par - 1), 1e-300)
            << "); unresolved direction dominated by " << basis[worst].name;
        throw NumericalError(msg.str());
    }
    const Eigen::VectorXd theta = svd.solve(w);
    ReconstructedState out;
    out.raw = Matrix::Zero(n_rec, n_rec);
    for (Eigen::Index b = 0; b < n_par; ++b) out.raw += theta(b) * basis[b].m;
    out.residual_norm = (a * theta - w).norm();
    out.rho = detail::project_physical(out.raw, &out.clipped_weight, &out.eigenvalues);
    out.label = map.label;
    return out;
}

// ---- full protocol ---------------------------------------------------------

enum class TargetState { zero, one, plus };

inline std::string to_string(TargetState s) {
    switch (s) {
        case TargetState::zero: return "zero";
        case TargetState::one: return "one";
        case TargetState::plus: return "plus";
    }
    return "unknown";
}

inline TargetState target_from_string(const std::string& s) {
    if (s == "zero" || s == "0") return TargetState::zero;
    if (s == "one" || s == "1") return TargetState::one;
    if (s == "plus" || s == "+") return TargetState::plus;
    throw std::invalid_argument("unknown target state '" + s + "' (zero|one|plus)");
}

inline Vector target_vector(TargetState s, int dim) {
    Vector v = Vector::Zero(dim);
    switch (s) {
        case TargetState::zero: v(0) = 1.0; break;
        case TargetState::one: v(1) = 1.0; break;
        case TargetState::plus: v(0) = v(1) = 1.0 / std::sqrt(2.0); break;
    }
    return v;
}

struct ProtocolConfig {
    dynamics::SystemModel model;
    lindblad::NoiseRates rates = lindblad::NoiseRates::canonical();
    HilbertSpace space{4, 2};          // preparation space
    double prep_duration = 100.0;      // ns, gaussian 4σ
    bool finite_displacement = false;  // simulate the displacement pulse instead of applying D(−α)
    double displacement_duration = 10.0;
    int displacement_levels = 30;
    ReadoutModel readout = ReadoutModel::selective(units::mhz_to_rad(-16.16), units::khz_to_rad(35.2),
                                                   units::mhz_to_rad(0.5));
    bool calibrate_readout = true;
    int n_rec = 4;
    int work_dim = default_work_dim;
    lindblad::SolverConfig solver;
    // Short, strongly driven displacement pulses integrate fastest adaptively.
    lindblad::SolverConfig displacement_solver = adaptive_solver(1e-9, 1e-11);

    static lindblad::SolverConfig adaptive_solver(double rtol, double atol) {
        lindblad::SolverConfig s;
        s.method = lindblad::Method::rk45;
        s.rtol = rtol;
        s.atol = atol;
        return s;
    }
};

struct Preparation {
    Matrix rho_a;  // reduced logical state after the preparation pulse
    double pi_amplitude = 0.0;
    double drive_amplitude = 0.0;
    lindblad::Health health;
};

namespace detail {

inline DensityMatrix initial_state(const ProtocolConfig& cfg) {
    if (cfg.rates.n_thermal > 0.0) return DensityMatrix::thermal(cfg.space, cfg.rates.n_thermal);
    return DensityMatrix::vacuum(cfg.space);
}

inline lindblad::Trajectory run_prep(const ProtocolConfig& cfg, double amplitude) {
    const double t = cfg.prep_duration;
    auto seq = std::make_shared<pulses::PulseSequence>(t);
    seq->add(pulses::Channel::flux_pump, pulses::Envelope::square(0.0, t));
    seq->add(pulses::Channel::logical_drive, pulses::Envelope::gaussian(0.0, t, amplitude, M_PI / 2));  // y rotation
    dynamics::DriveSettings drive;
    drive.omega_d = cfg.model.omega_a_on();
    drive.omega_p = cfg.model.optimal_pump();
    drive.eps_d = 1.0;
    drive.sequence = seq;
    const dynamics::FrameHamiltonian frame(cfg.model, drive, cfg.space);
    lindblad::SolverConfig solver = cfg.solver;
    solver.dt = std::min(solver.dt, t);
    return lindblad::evolve(initial_state(cfg), frame.decomposition(), cfg.rates, solver, 0.0, t,
                            {number(cfg.space, Mode::logical).matrix()});
}

}  // namespace detail

// Pumped oscillator, calibrated gaussian π_y (or π_y/2) pulse, pump off.
inline Preparation prepare(TargetState target, const ProtocolConfig& cfg) {
    cfg.space.validate();
    Preparation out;
    if (target == TargetState::zero) {
        const DensityMatrix rho = detail::initial_state(cfg);
        out.rho_a = rho.reduced_logical();
        return out;
    }
    const auto shape = pulses::Envelope::gaussian(0.0, cfg.prep_duration);
    const auto cal = pulses::calibrate_pi_pulse(
        shape, [&](const pulses::Envelope& e) { return detail::run_prep(cfg, e.amplitude).expectations[0].back().real(); },
        std::nullopt, 1e-6);
    out.pi_amplitude = cal.pi_amplitude;
    out.drive_amplitude = target == TargetState::one ? cal.pi_amplitude : cal.half_pi_amplitude;
    const auto tr = detail::run_prep(cfg, out.drive_amplitude);
    out.rho_a = tr.final_density().reduced_logical();
    out.health = tr.health;
    return out;
}

// Resonant drive pulse implementing D(−α) on the logical mode with pump off
// (Kerr and loss included).
inline Matrix finite_displacement(const Matrix& rho_a, cplx alpha, const ProtocolConfig& cfg) {
    const int n = std::max<int>(cfg.displacement_levels, static_cast<int>(rho_a.rows()));
    const HilbertSpace s{n, 2};
    const double t = cfg.displacement_duration;
    const auto shape = pulses::Envelope::gaussian(0.0, t);
    const double area = shape.shape_area();
    // H = c(t)a† + c*(t)a displaces by −i∫c dt; choose that to equal −α.
    const cplx c0 = cplx(0.0, -1.0) * alpha / area;
    dynamics::TimeDependentOperator h(s);
    const auto ops = dynamics::detail::mode_ops(s);
    h.constant = dynamics::detail::kerr_terms(ops, cfg.model.chi_aa, cfg.model.chi_bb, cfg.model.chi_ab);
    h.add_complex(ops.a.adjoint(), [shape, c0](double tt) { return c0 * shape.shape_at(tt); });
    Matrix padded = Matrix::Zero(n, n);
    padded.topLeftCorner(rho_a.rows(), rho_a.cols()) = rho_a;
    lindblad::NoiseRates rates = cfg.rates;
    rates.kappa_b = 0.0;
    lindblad::SolverConfig solver = cfg.displacement_solver;
    solver.dt = t;
    solver.check_health = false;
    const auto tr = lindblad::evolve(DensityMatrix::logical(s, padded), h, rates, solver, 0.0, t);
    return tr.final_density().reduced_logical();
}

struct ProtocolResult {
    Preparation preparation;
    WignerMap map;
    ReconstructedState state;
    std::optional<PoissonCalibration> calibration;
};

// Readout calibration on simulated data: displace vacuum by instrument
// amplitudes u (scale 1 instrument unit = 1 |α|), record channels 0..3.
inline PoissonCalibration simulate_readout_calibration(const ProtocolConfig& cfg, int points = 25, double u_max = 2.5) {
    std::vector<double> u;
    std::vector<std::vector<double>> v(4);
    const int dim = std::max(cfg.work_dim, 8);
    Matrix vac = Matrix::Zero(dim, dim);
    vac(0, 0) = 1.0;
    for (int i = 0; i < points; ++i) {
        const double x = u_max * i / (points - 1);
        const Matrix d = fock::displacement(dim, x);
        const auto p = readout_distribution(d * vac * d.adjoint(), cfg.readout);
        u.push_back(x);
        for (int n = 0; n < 4; ++n) v[n].push_back(p[n]);
    }
    return poisson_calibrate(u, v);
}

// Prepare once, then for every grid point displace by −α, read photon
// numbers and form the parity sum; reconstruct at n_rec.
inline ProtocolResult full_protocol(TargetState target, const ProtocolConfig& cfg, const WignerGrid& grid,
                                    unsigned jobs = 1) {
    ProtocolResult out;
    out.preparation = prepare(target, cfg);
    if (cfg.calibrate_readout && !cfg.readout.ideal) out.calibration = simulate_readout_calibration(cfg);
    const Matrix& rho = out.preparation.rho_a;
    const int dim = detail::working_dim(rho, cfg.work_dim);
    detail::check_alpha(dim, grid.max_radius());
    detail::check_dispersive(cfg.readout);
    out.map = WignerMap{grid, std::vector<double>(grid.size()), to_string(target)};
    const auto& cal = out.calibration;
    parallel_for(grid.size(), jobs, [&](std::size_t k) {
        const cplx alpha = grid.alpha(k);
        Matrix displaced;
        if (cfg.finite_displacement) {
            displaced = finite_displacement(rho, alpha, cfg);
        } else {
            const Matrix padded = detail::pad(rho, dim);
            const Matrix d = fock::displacement(dim, -alpha);
            displaced = d * padded * d.adjoint();
        }
        const auto p = readout_distribution(displaced, cfg.readout);
        double parity = 0.0;
        for (std::size_t n = 0; n < p.size(); ++n) {
            double pn = p[n];
            if (cal && n < cal->norms.size()) pn /= cal->norms[n];
            parity += (n % 2 == 0 ? 1.0 : -1.0) * pn;
        }
        out.map.values[k] = wigner_max * parity;
    });
    out.state = reconstruct(out.map, cfg.n_rec, cfg.work_dim);
    out.state.fidelity = fidelity(out.state.rho, target_vector(target, cfg.n_rec));
    return out;
}

}  // namespace stimosc::tomography
