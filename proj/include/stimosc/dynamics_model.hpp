#pragma once

// Hamiltonian assembly: static two-mode Hamiltonian, flux-pump coupling and
// shifts, dressed frequencies, rotating-frame and lab-frame time-dependent
// Hamiltonians, and labelled eigenspectra. Energies in rad/ns, times in ns.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "stimosc/circuit_model.hpp"
#include "stimosc/errors.hpp"
#include "stimosc/operator_algebra.hpp"
#include "stimosc/pulses.hpp"

namespace stimosc::dynamics {

using circuit::CircuitParams;
using circuit::ModelCoefficients;

// ---- flux modulation ------------------------------------------------------

struct ModulationCoupling {
    double delta = 0.0;      // Φ₀
    double bias = 0.0;       // Φ₀
    double g2_tilde = 0.0;   // first-harmonic amplitude of g₂(Φ(t)), rad/ns
    double shift_a = 0.0;    // period-averaged ω_a(Φ(t)) − ω_a(bias), rad/ns
    double shift_b = 0.0;
    // Cross-checks.
    double slope = 0.0;            // ∂g₂/∂Φ at bias, rad/ns/Φ₀
    double small_delta = 0.0;      // δ·∂g₂/∂Φ
    double bessel_flux = 0.0;      // 2J₁(δ)·∂g₂/∂Φ, δ taken as the Bessel argument
    double bessel_phase = 0.0;     // 2J₁(2πδ)·∂g₂/∂Φ/(2π), reduced-flux argument
    double curvature_shift_a = 0.0;  // +δ²/4·∂²ω_a/∂Φ² (period average, leading order)
    double curvature_shift_b = 0.0;
    double negative_curvature_shift_a = 0.0;  // −δ²/4·∂²ω_a/∂Φ²
    double negative_curvature_shift_b = 0.0;
};

inline constexpr double max_validated_delta = 0.25;

// g̃₂ and shifts from Fourier sampling Φ(θ) = bias + δ cos θ over one period.
inline ModulationCoupling modulation_coupling(const CircuitParams& params, double delta, double bias = 0.0,
                                              int samples = 64) {
    params.validate();
    if (samples < 8) throw std::invalid_argument("modulation_coupling: need >= 8 samples");
    if (!(delta >= 0.0 && delta <= max_validated_delta)) {
        std::ostringstream msg;
        msg << "flux modulation amplitude " << delta << " Phi0 outside validated range [0, " << max_validated_delta
            << "]";
        Warnings::emit(msg.str());
    }
    ModulationCoupling out;
    out.delta = delta;
    out.bias = bias;
    const auto rest = circuit::normal_modes(params.at_flux(bias));
    if (delta != 0.0) {
        double first = 0.0, mean_a = 0.0, mean_b = 0.0;
        for (int k = 0; k < samples; ++k) {
            const double theta = units::two_pi * k / samples;
            const auto m = circuit::normal_modes(params.at_flux(bias + delta * std::cos(theta)));
            first += m.g2 * std::cos(theta);
            mean_a += m.omega_a;
            mean_b += m.omega_b;
        }
        out.g2_tilde = 2.0 * first / samples;
        out.shift_a = mean_a / samples - rest.omega_a;
        out.shift_b = mean_b / samples - rest.omega_b;
    }
    out.slope = circuit::dg2_dflux(params, bias);
    out.small_delta = delta * out.slope;
    out.bessel_flux = 2.0 * std::cyl_bessel_j(1.0, delta) * out.slope;
    out.bessel_phase = 2.0 * std::cyl_bessel_j(1.0, units::two_pi * delta) * out.slope / units::two_pi;
    const auto curv = circuit::d2omega_dflux2(params, bias);
    out.curvature_shift_a = delta * delta / 4.0 * curv[0];
    out.curvature_shift_b = delta * delta / 4.0 * curv[1];
    out.negative_curvature_shift_a = -out.curvature_shift_a;
    out.negative_curvature_shift_b = -out.curvature_shift_b;
    return out;
}

// Operating point is Φ = 0 for a sweep: its parameters carry the device.
inline ModulationCoupling modulation_coupling(const circuit::FluxSweep& sweep, double delta) {
    return modulation_coupling(sweep.params, delta, 0.0);
}

// Smallest δ in [0, 0.25] with √2·|g̃₂| equal to the target (rad/ns).
inline double delta_for_coupling(const CircuitParams& params, double sqrt2_g2_target, double bias = 0.0) {
    auto f = [&](double d) { return std::sqrt(2.0) * std::abs(modulation_coupling(params, d, bias).g2_tilde); };
    double lo = 0.0, hi = max_validated_delta;
    if (f(hi) < sqrt2_g2_target) throw NumericalError("delta_for_coupling: target not reachable for delta <= 0.25");
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < sqrt2_g2_target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// ---- dressing -----------------------------------------------------------

struct DressedFrequencies {
    double omega_a = 0.0;
    double omega_b = 0.0;
};

inline DressedFrequencies schrieffer_wolff_dressed(double omega_a, double omega_b, double g) {
    const double detuning = omega_b - omega_a;
    if (g == 0.0) return {omega_a, omega_b};
    if (std::abs(detuning) < 10.0 * std::abs(g)) {
        std::ostringstream msg;
        msg << "schrieffer_wolff_dressed: |omega_b - omega_a| = " << std::abs(detuning) << " < 10|g| = "
            << 10.0 * std::abs(g) << " (dispersive expansion invalid)";
        throw NumericalError(msg.str());
    }
    const double shift = g * g / detuning;
    return {omega_a - shift, omega_b + shift};
}

inline DressedFrequencies schrieffer_wolff_dressed(const ModelCoefficients& c) {
    return schrieffer_wolff_dressed(c.omega_a, c.omega_b, c.g);
}

// ---- operating point ----------------------------------------------------

// Device quantities needed for the rotating-frame model.
struct SystemModel {
    double omega_a = 0.0;  // dressed, pump off
    double omega_b = 0.0;
    double chi_aa = 0.0;
    double chi_bb = 0.0;
    double chi_ab = 0.0;
    double g2_tilde = 0.0;
    double shift_a = 0.0;  // pump-on shifts at full envelope
    double shift_b = 0.0;

    static SystemModel from_circuit(const CircuitParams& params, double delta, double bias = 0.0) {
        const auto c = circuit::normal_modes(params.at_flux(bias));
        const auto dressed = schrieffer_wolff_dressed(c);
        const auto mc = modulation_coupling(params, delta, bias);
        return {dressed.omega_a, dressed.omega_b, c.chi_aa, c.chi_bb, c.chi_ab, mc.g2_tilde, mc.shift_a, mc.shift_b};
    }

    double omega_a_on() const { return omega_a + shift_a; }
    double omega_b_on() const { return omega_b + shift_b; }

    // Pump frequency putting |2_a 0_b⟩ and |0_a 1_b⟩ on exact resonance,
    // including the self-Kerr shift of the two-photon level.
    double optimal_pump() const { return 2.0 * omega_a_on() - omega_b_on() + chi_aa; }
    double kerr_free_pump() const { return 2.0 * omega_a_on() - omega_b_on(); }

    SystemModel without_kerr() const {
        SystemModel m = *this;
        m.chi_aa = m.chi_bb = m.chi_ab = 0.0;
        return m;
    }
};

struct DriveSettings {
    double omega_p = 0.0;   // flux pump angular frequency, rad/ns
    double delta = 0.0;     // flux modulation amplitude, Φ₀ (bookkeeping; g̃₂ lives in SystemModel)
    double omega_d = 0.0;   // logical-mode frame/drive frequency, rad/ns
    double eps_d = 0.0;     // logical drive amplitude, rad/ns
    double eps_probe = 0.0; // blockade probe amplitude, rad/ns (probe at the b frame frequency 2ω_d − ω_p)
    double drive_phase = 0.0;
    double pump_level = 1.0;  // envelope value used when no sequence is given
    // Envelopes; channel amplitudes are dimensionless multipliers of δ, ε_d, ε_probe.
    // Without a sequence every channel is held constant (pump at pump_level).
    std::shared_ptr<const pulses::PulseSequence> sequence;

    void validate() const {
        if (!(delta >= 0.0 && delta <= max_validated_delta)) throw std::invalid_argument("DriveSettings: delta outside [0, 0.25]");
        if (!(eps_d >= 0.0) || !(eps_probe >= 0.0)) throw std::invalid_argument("DriveSettings: drive amplitudes must be >= 0");
        if (!std::isfinite(omega_p) || !std::isfinite(omega_d)) throw std::invalid_argument("DriveSettings: non-finite frequency");
        if (sequence) sequence->validate();
    }

    double omega_b_frame() const { return 2.0 * omega_d - omega_p; }
};

// ---- time-dependent operators -------------------------------------------

// H(t) = constant + Σ_k coeff_k(t)·op_k with hermitian op_k and real coefficients.
struct TimeDependentOperator {
    HilbertSpace space;
    Matrix constant;
    struct Term {
        Matrix op;
        std::function<double(double)> coeff;
    };
    std::vector<Term> terms;

    explicit TimeDependentOperator(HilbertSpace s = {}) : space(s), constant(Matrix::Zero(s.dim(), s.dim())) {}
    explicit TimeDependentOperator(const Operator& h) : space(h.space()), constant(h.matrix()) {}

    void add(Matrix op, std::function<double(double)> coeff) { terms.push_back({std::move(op), std::move(coeff)}); }

    // c(t)·X + c*(t)·X† split into two hermitian terms.
    void add_complex(const Matrix& x, std::function<std::complex<double>(double)> c) {
        const Matrix re_part = x + x.adjoint();
        const Matrix im_part = cplx(0, 1) * (x - x.adjoint());
        add(re_part, [c](double t) { return c(t).real(); });
        add(im_part, [c](double t) { return c(t).imag(); });
    }

    bool time_independent() const { return terms.empty(); }

    Matrix at(double t) const {
        Matrix h = constant;
        for (const auto& term : terms) {
            const double c = term.coeff(t);
            if (c != 0.0) h += c * term.op;
        }
        return h;
    }

    Operator operator_at(double t) const { return {space, at(t), false}; }
};

// ---- Hamiltonians -------------------------------------------------------

namespace detail {

struct ModeOps {
    Matrix a, b, na, nb, id;
};

inline ModeOps mode_ops(HilbertSpace s) {
    return {ladder(s, Mode::logical).matrix(), ladder(s, Mode::blockade).matrix(), number(s, Mode::logical).matrix(),
            number(s, Mode::blockade).matrix(), Matrix::Identity(s.dim(), s.dim())};
}

inline Matrix kerr_terms(const ModeOps& o, double chi_aa, double chi_bb, double chi_ab) {
    const Matrix ad = o.a.adjoint(), bd = o.b.adjoint();
    return chi_ab * o.na * o.nb + 0.5 * chi_aa * ad * ad * o.a * o.a + 0.5 * chi_bb * bd * bd * o.b * o.b;
}

inline Matrix three_wave(const ModeOps& o) {
    const Matrix ad = o.a.adjoint();
    return ad * ad * o.b;  // a†²b; hermitian part added by caller
}

inline Matrix power(const Matrix& m, int k) {
    Matrix r = Matrix::Identity(m.rows(), m.cols());
    for (int i = 0; i < k; ++i) r = r * m;
    return r;
}

}  // namespace detail

// Normal-ordered :φ̃ⁿ: with φ̃ = z_a(a + a†) + z_b(b + b†), built on a padded
// space and truncated back to `space`.
inline Matrix normal_ordered_power(HilbertSpace space, double z_a, double z_b, int n, int padding = 4) {
    const HilbertSpace big{space.n_a + padding, space.n_b + padding};
    const auto o = detail::mode_ops(big);
    const Matrix ad = o.a.adjoint(), bd = o.b.adjoint();
    Matrix out = Matrix::Zero(big.dim(), big.dim());
    // multinomial over (k_a†, k_a, k_b†, k_b)
    for (int kad = 0; kad <= n; ++kad)
        for (int ka = 0; ka + kad <= n; ++ka)
            for (int kbd = 0; kbd + ka + kad <= n; ++kbd) {
                const int kb = n - kad - ka - kbd;
                const double mult = std::tgamma(n + 1.0) / (std::tgamma(kad + 1.0) * std::tgamma(ka + 1.0) *
                                                           std::tgamma(kbd + 1.0) * std::tgamma(kb + 1.0));
                const double coeff = mult * std::pow(z_a, kad + ka) * std::pow(z_b, kbd + kb);
                out += coeff * detail::power(ad, kad) * detail::power(o.a, ka) * detail::power(bd, kbd) *
                       detail::power(o.b, kb);
            }
    // truncate: keep rows/cols with i_a < n_a and i_b < n_b
    Matrix cut(space.dim(), space.dim());
    for (int i = 0; i < space.dim(); ++i)
        for (int j = 0; j < space.dim(); ++j)
            cut(i, j) = out(big.index(space.logical_of(i), space.blockade_of(i)),
                            big.index(space.logical_of(j), space.blockade_of(j)));
    return cut;
}

// ω_a a†a + ω_b b†b + g(a†b + ab†) + g₂(a†²b + a²b†) + Kerr. With
// full_mixing, the RWA three-wave and Kerr terms are replaced by the
// complete normal-ordered ξ₃φ̃³ + ξ₄φ̃⁴.
inline Operator build_static_hamiltonian(const ModelCoefficients& c, HilbertSpace space, bool full_mixing = false) {
    space.validate();
    const auto o = detail::mode_ops(space);
    Matrix h = c.omega_a * o.na + c.omega_b * o.nb;
    const Matrix hop = o.a.adjoint() * o.b;
    h += c.g * (hop + hop.adjoint());
    if (full_mixing) {
        h += c.expansion.xi3() * normal_ordered_power(space, c.zpf_a, c.zpf_b, 3);
        h += c.expansion.xi4() * normal_ordered_power(space, c.zpf_a, c.zpf_b, 4);
    } else {
        const Matrix tw = detail::three_wave(o);
        h += c.g2 * (tw + tw.adjoint());
        h += detail::kerr_terms(o, c.chi_aa, c.chi_bb, c.chi_ab);
    }
    h = 0.5 * (h + h.adjoint()).eval();
    return {space, h, true};
}

// Rotating-frame Hamiltonian
//   Δ_a a†a + Δ_b b†b + s(t)·g̃₂(a†²b + h.c.) + H_Kerr + (d(t)a† + h.c.) + (p(t)b† + h.c.)
// with Δ_a = ω′_a + s²Δω_a − ω_d, Δ_b = ω′_b + s²Δω_b − (2ω_d − ω_p).
class FrameHamiltonian {
public:
    FrameHamiltonian(SystemModel model, DriveSettings drive, HilbertSpace space)
        : model_(model), drive_(std::move(drive)), space_(space), ops_(detail::mode_ops(space)) {
        space_.validate();
        drive_.validate();
    }

    const SystemModel& model() const noexcept { return model_; }
    const DriveSettings& drive() const noexcept { return drive_; }
    const HilbertSpace& space() const noexcept { return space_; }

    double pump_envelope(double t) const {
        if (!drive_.sequence) return drive_.pump_level;
        return std::abs(drive_.sequence->sample(pulses::Channel::flux_pump, clamp(t)));
    }
    cplx drive_amplitude(double t) const {
        const cplx phase = std::polar(1.0, drive_.drive_phase);
        if (!drive_.sequence) return drive_.eps_d * phase;
        return drive_.eps_d * phase * drive_.sequence->sample(pulses::Channel::logical_drive, clamp(t));
    }
    cplx probe_amplitude(double t) const {
        if (!drive_.sequence) return drive_.eps_probe;
        return drive_.eps_probe * drive_.sequence->sample(pulses::Channel::blockade_probe, clamp(t));
    }

    double delta_a(double s) const { return model_.omega_a + s * s * model_.shift_a - drive_.omega_d; }
    double delta_b(double s) const { return model_.omega_b + s * s * model_.shift_b - drive_.omega_b_frame(); }

    Operator at(double t) const {
        const double s = pump_envelope(t);
        Matrix h = delta_a(s) * ops_.na + delta_b(s) * ops_.nb + kerr();
        const Matrix tw = detail::three_wave(ops_);
        h += s * model_.g2_tilde * (tw + tw.adjoint());
        const cplx d = drive_amplitude(t);
        h += d * ops_.a.adjoint() + std::conj(d) * ops_.a;
        const cplx p = probe_amplitude(t);
        h += p * ops_.b.adjoint() + std::conj(p) * ops_.b;
        return {space_, h, false};
    }

    // Same Hamiltonian split into constant and envelope-weighted parts.
    TimeDependentOperator decomposition() const {
        TimeDependentOperator td(space_);
        const Matrix tw = detail::three_wave(ops_);
        const Matrix coupling = model_.g2_tilde * (tw + tw.adjoint());
        const Matrix shifts = model_.shift_a * ops_.na + model_.shift_b * ops_.nb;
        td.constant = (model_.omega_a - drive_.omega_d) * ops_.na + (model_.omega_b - drive_.omega_b_frame()) * ops_.nb +
                      kerr();
        const auto seq = drive_.sequence;
        if (!seq) {
            const double s = drive_.pump_level;
            td.constant += s * coupling + s * s * shifts;
            const cplx d = drive_amplitude(0.0);
            td.constant += d * ops_.a.adjoint() + std::conj(d) * ops_.a;
            const cplx p = probe_amplitude(0.0);
            td.constant += p * ops_.b.adjoint() + std::conj(p) * ops_.b;
            return td;
        }
        const FrameHamiltonian self = *this;
        if (seq->has_channel(pulses::Channel::flux_pump)) {
            td.add(coupling, [self](double t) { return self.pump_envelope(t); });
            td.add(shifts, [self](double t) {
                const double s = self.pump_envelope(t);
                return s * s;
            });
        }
        if (seq->has_channel(pulses::Channel::logical_drive) && drive_.eps_d != 0.0) {
            td.add_complex(ops_.a.adjoint(), [self](double t) { return self.drive_amplitude(t); });
        }
        if (seq->has_channel(pulses::Channel::blockade_probe) && drive_.eps_probe != 0.0) {
            td.add_complex(ops_.b.adjoint(), [self](double t) { return self.probe_amplitude(t); });
        }
        return td;
    }

private:
    double clamp(double t) const { return std::clamp(t, 0.0, drive_.sequence->total_duration()); }
    Matrix kerr() const { return detail::kerr_terms(ops_, model_.chi_aa, model_.chi_bb, model_.chi_ab); }

    SystemModel model_;
    DriveSettings drive_;
    HilbertSpace space_;
    detail::ModeOps ops_;
};

inline Operator rotating_frame_hamiltonian(const SystemModel& model, const DriveSettings& drive, HilbertSpace space,
                                           double t) {
    return FrameHamiltonian(model, drive, space).at(t);
}

// Lab-frame counterpart of FrameHamiltonian: the same model with explicit
// e^{∓iω_p t} and e^{∓iω_d t} carriers. The rotating frame follows from
// U(t) = exp(i t (ω_d a†a + (2ω_d − ω_p) b†b)).
inline TimeDependentOperator lab_frame_hamiltonian(const SystemModel& model, const DriveSettings& drive,
                                                   HilbertSpace space) {
    const FrameHamiltonian frame(model, drive, space);
    const auto o = detail::mode_ops(space);
    TimeDependentOperator td(space);
    td.constant = model.omega_a * o.na + model.omega_b * o.nb +
                  detail::kerr_terms(o, model.chi_aa, model.chi_bb, model.chi_ab);
    const Matrix shifts = model.shift_a * o.na + model.shift_b * o.nb;
    td.add(shifts, [frame](double t) {
        const double s = frame.pump_envelope(t);
        return s * s;
    });
    const double wp = drive.omega_p, wd = drive.omega_d, wb = drive.omega_b_frame();
    const double g = model.g2_tilde;
    td.add_complex(detail::three_wave(o).adjoint(), [frame, g, wp](double t) {
        return g * frame.pump_envelope(t) * std::polar(1.0, wp * t);  // coefficient of a²b†
    });
    td.add_complex(o.a.adjoint(), [frame, wd](double t) { return frame.drive_amplitude(t) * std::polar(1.0, -wd * t); });
    td.add_complex(o.b.adjoint(), [frame, wb](double t) { return frame.probe_amplitude(t) * std::polar(1.0, -wb * t); });
    return td;
}

// ---- spectra ------------------------------------------------------------

struct Eigenstate {
    double energy = 0.0;
    int i_a = 0;  // dominant bare Fock label
    int i_b = 0;
    double overlap = 0.0;  // |⟨i_a i_b|ψ⟩|²
    bool ambiguous = false;
    int manifold() const { return i_a + 2 * i_b; }
};

struct Spectrum {
    std::vector<Eigenstate> states;  // ascending energy
    Matrix vectors;                  // columns match states
};

inline Spectrum eigenspectrum(const Operator& h) {
    const HilbertSpace s = h.space();
    const Matrix herm = 0.5 * (h.matrix() + h.matrix().adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(herm);
    if (solver.info() != Eigen::Success) throw NumericalError("eigenspectrum: diagonalization failed");
    Spectrum out;
    out.vectors = solver.eigenvectors();
    for (int k = 0; k < s.dim(); ++k) {
        const Vector v = out.vectors.col(k);
        int best = 0;
        double best_w = -1.0, second_w = -1.0;
        for (int i = 0; i < s.dim(); ++i) {
            const double w = std::norm(v(i));
            if (w > best_w + 1e-9) {
                second_w = best_w;
                best_w = w;
                best = i;
            } else if (w > second_w) {
                second_w = w;
            }
        }
        Eigenstate e;
        e.energy = solver.eigenvalues()(k);
        e.i_a = s.logical_of(best);
        e.i_b = s.blockade_of(best);
        e.overlap = best_w;
        e.ambiguous = std::abs(best_w - second_w) <= 1e-9;
        out.states.push_back(e);
    }
    return out;
}

// Spectrum at the envelope plateau (pump at full level, drive off).
inline Spectrum eigenspectrum(const SystemModel& model, DriveSettings drive, HilbertSpace space) {
    drive.sequence.reset();
    drive.eps_d = 0.0;
    drive.eps_probe = 0.0;
    drive.pump_level = 1.0;
    return eigenspectrum(rotating_frame_hamiltonian(model, drive, space, 0.0));
}

// Transition energies out of the ground state (frame units):
// ω_01 to the |1_a⟩-like state and ω_02± to the two states carrying the most
// weight in span{|2_a 0_b⟩, |0_a 1_b⟩}.
struct Transitions {
    double omega_01 = 0.0;
    double omega_02_minus = 0.0;
    double omega_02_plus = 0.0;
    double omega_12_minus() const { return omega_02_minus - omega_01; }
    double omega_12_plus() const { return omega_02_plus - omega_01; }
};

inline Transitions transitions(const Spectrum& sp, HilbertSpace s) {
    auto weight = [&](int k, std::initializer_list<std::pair<int, int>> labels) {
        double w = 0.0;
        for (auto [ia, ib] : labels) w += std::norm(sp.vectors(s.index(ia, ib), k));
        return w;
    };
    const int n = s.dim();
    int ground = 0, one = 0;
    double wg = -1, w1 = -1;
    std::vector<std::pair<double, int>> two;
    for (int k = 0; k < n; ++k) {
        const double g = weight(k, {{0, 0}});
        const double o = weight(k, {{1, 0}});
        if (g > wg) wg = g, ground = k;
        if (o > w1) w1 = o, one = k;
        two.emplace_back(weight(k, {{2, 0}, {0, 1}}), k);
    }
    std::sort(two.begin(), two.end(), [](auto& x, auto& y) { return x.first > y.first; });
    const double e0 = sp.states[ground].energy;
    double lo = sp.states[two[0].second].energy - e0;
    double hi = sp.states[two[1].second].energy - e0;
    if (lo > hi) std::swap(lo, hi);
    return {sp.states[one].energy - e0, lo, hi};
}

}  // namespace stimosc::dynamics
