#pragma once

// Protocol drivers: spectroscopy maps, coupling calibration, Rabi chevrons and
// linewidths, and the coherence suite. Every driver returns an
// ExperimentResult (tables + fits + metadata) that serializes to JSON and CSV.
//
// Frequencies are rad/ns internally; tables and fits use display units
// (GHz, MHz, kHz, ns, μs) named in each axis/parameter.

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stimosc/circuit_model.hpp"
#include "stimosc/dynamics_model.hpp"
#include "stimosc/errors.hpp"
#include "stimosc/fitting.hpp"
#include "stimosc/lindblad.hpp"
#include "stimosc/operator_algebra.hpp"
#include "stimosc/parallel.hpp"
#include "stimosc/pulses.hpp"
#include "stimosc/tomography.hpp"
#include "stimosc/units.hpp"

namespace stimosc::experiments {

using dynamics::DriveSettings;
using dynamics::SystemModel;
using lindblad::NoiseRates;
using lindblad::SolverConfig;
using json = nlohmann::ordered_json;

inline constexpr double nan = std::numeric_limits<double>::quiet_NaN();

inline std::vector<double> linspace(double lo, double hi, int n) {
    if (n < 1) throw std::invalid_argument("linspace: n must be >= 1");
    if (n == 1) return {lo};
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
    return v;
}

// ---- result containers ------------------------------------------------------

struct Axis {
    std::string name;
    std::string unit;
    std::vector<double> values;

    void validate() const {
        if (values.empty()) throw std::invalid_argument("axis '" + name + "' is empty");
        const bool up = std::is_sorted(values.begin(), values.end(), std::less_equal<>());
        const bool down = std::is_sorted(values.begin(), values.end(), std::greater_equal<>());
        if (values.size() > 1 && !up && !down) throw std::invalid_argument("axis '" + name + "' is not strictly monotone");
    }
};

// Rectangular data over the outer product of its axes; the last axis varies
// fastest in the flattened column vectors.
struct Table {
    std::string name;
    std::vector<Axis> axes;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> data;

    std::size_t points() const {
        std::size_t n = 1;
        for (const auto& a : axes) n *= a.values.size();
        return n;
    }

    void add(std::string column, std::vector<double> values) {
        columns.push_back(std::move(column));
        data.push_back(std::move(values));
    }

    const std::vector<double>& column(const std::string& c) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == c) return data[i];
        throw std::out_of_range("table '" + name + "' has no column '" + c + "'");
    }

    void validate() const {
        for (const auto& a : axes) a.validate();
        if (columns.size() != data.size()) throw std::logic_error("table '" + name + "': column/data count mismatch");
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (data[i].size() != points()) {
                throw std::logic_error("table '" + name + "': column '" + columns[i] + "' does not match its axes");
            }
        }
    }

    void write_csv(std::ostream& os) const {
        validate();
        bool first = true;
        auto sep = [&] {
            if (!first) os << ',';
            first = false;
        };
        for (const auto& a : axes) {
            sep();
            os << a.name << (a.unit.empty() ? "" : "_" + a.unit);
        }
        for (const auto& c : columns) {
            sep();
            os << c;
        }
        os << '\n' << std::setprecision(12);
        std::vector<std::size_t> idx(axes.size(), 0);
        for (std::size_t k = 0; k < points(); ++k) {
            std::size_t rem = k;
            for (std::size_t a = axes.size(); a-- > 0;) {
                idx[a] = rem % axes[a].values.size();
                rem /= axes[a].values.size();
            }
            first = true;
            for (std::size_t a = 0; a < axes.size(); ++a) {
                sep();
                os << axes[a].values[idx[a]];
            }
            for (const auto& col : data) {
                sep();
                os << col[k];
            }
            os << '\n';
        }
    }
};

struct FitParameter {
    std::string name;
    double value = nan;
    double error = nan;
    std::string unit;
};

struct FitReport {
    std::string name;
    std::string model;
    std::vector<FitParameter> params;
    double residual_norm = nan;
    bool low_confidence = false;
    std::string note;

    FitReport& add(std::string n, double v, double e, std::string unit = {}) {
        params.push_back({std::move(n), v, e, std::move(unit)});
        return *this;
    }
    const FitParameter& param(const std::string& n) const {
        for (const auto& p : params)
            if (p.name == n) return p;
        throw std::out_of_range("fit '" + name + "' has no parameter '" + n + "'");
    }
    double value(const std::string& n) const { return param(n).value; }
    double error(const std::string& n) const { return param(n).error; }
};

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct ExperimentResult {
    std::string name;
    std::vector<Table> tables;  // tables[0] is the primary sweep
    std::vector<FitReport> fits;
    json metadata = json::object();
    json summary = json::object();
    lindblad::Health health;
    std::vector<std::string> warnings;

    const Table& table(const std::string& n) const {
        for (const auto& t : tables)
            if (t.name == n) return t;
        throw std::out_of_range("result '" + name + "' has no table '" + n + "'");
    }
    const FitReport& fit(const std::string& n) const {
        for (const auto& f : fits)
            if (f.name == n) return f;
        throw std::out_of_range("result '" + name + "' has no fit '" + n + "'");
    }

    void validate() const {
        for (const auto& t : tables) t.validate();
        for (const auto& f : fits) {
            if (!std::isfinite(f.residual_norm) && !f.low_confidence) {
                throw std::logic_error("fit '" + f.name + "' has no residual norm");
            }
        }
    }

    json to_json() const {
        json j;
        j["experiment"] = name;
        j["metadata"] = metadata;
        j["summary"] = summary;
        json fj = json::array();
        for (const auto& f : fits) {
            json e;
            e["name"] = f.name;
            e["model"] = f.model;
            json ps = json::object();
            for (const auto& p : f.params) {
                ps[p.name] = {{"value", number_or_null(p.value)}, {"error", number_or_null(p.error)}, {"unit", p.unit}};
            }
            e["parameters"] = ps;
            e["residual_norm"] = number_or_null(f.residual_norm);
            e["low_confidence"] = f.low_confidence;
            if (!f.note.empty()) e["note"] = f.note;
            fj.push_back(e);
        }
        j["fits"] = fj;
        json tj = json::array();
        for (const auto& t : tables) {
            json e;
            e["name"] = t.name;
            json axes = json::array();
            for (const auto& a : t.axes) {
                axes.push_back({{"name", a.name},
                                {"unit", a.unit},
                                {"size", a.values.size()},
                                {"first", a.values.front()},
                                {"last", a.values.back()}});
            }
            e["axes"] = axes;
            e["columns"] = t.columns;
            e["file"] = name + "_" + t.name + ".csv";
            tj.push_back(e);
        }
        j["tables"] = tj;
        j["health"] = {{"ok", health.ok()},
                       {"duration_us", health.duration_us},
                       {"max_trace_error", health.max_trace_error},
                       {"max_hermiticity_error", health.max_hermiticity_error},
                       {"min_eigenvalue", health.min_eigenvalue}};
        j["warnings"] = warnings;
        return j;
    }
};

// ---- shared settings --------------------------------------------------------

struct Common {
    SystemModel model;
    NoiseRates rates = NoiseRates::canonical();
    SolverConfig solver;
    double delta = 0.0;  // modulation amplitude the model was built at, Φ₀
    unsigned jobs = 1;
    std::uint64_t seed = 1;
};

inline json describe(const SystemModel& m) {
    using namespace units;
    return {{"omega_a_GHz", rad_to_ghz(m.omega_a)},      {"omega_b_GHz", rad_to_ghz(m.omega_b)},
            {"chi_aa_MHz", rad_to_mhz(m.chi_aa)},        {"chi_bb_MHz", rad_to_mhz(m.chi_bb)},
            {"chi_ab_MHz", rad_to_mhz(m.chi_ab)},        {"g2_tilde_MHz", rad_to_mhz(m.g2_tilde)},
            {"shift_a_MHz", rad_to_mhz(m.shift_a)},      {"shift_b_MHz", rad_to_mhz(m.shift_b)},
            {"optimal_pump_GHz", rad_to_ghz(m.optimal_pump())}};
}

inline json describe(const NoiseRates& r) {
    using namespace units;
    return {{"kappa_a_kHz", rad_to_khz(r.kappa_a)},
            {"kappa_b_MHz", rad_to_mhz(r.kappa_b)},
            {"kappa_phi_a_kHz", rad_to_khz(r.kappa_phi_a)},
            {"n_thermal", r.n_thermal}};
}

inline json describe(const SolverConfig& s) {
    return {{"method", lindblad::to_string(s.method)}, {"dt_ns", s.dt}, {"step_safety", s.step_safety},
            {"rtol", s.rtol},                           {"atol", s.atol}};
}

inline json describe(HilbertSpace s) { return {{"n_a", s.n_a}, {"n_b", s.n_b}}; }

inline json base_metadata(const Common& c, HilbertSpace space) {
    return {{"model", describe(c.model)},
            {"noise", describe(c.rates)},
            {"solver", describe(c.solver)},
            {"truncation", describe(space)},
            {"delta_phi0", c.delta},
            {"seed", c.seed}};
}

// ---- peak utilities -----------------------------------------------------------

namespace detail {

// Interior local maxima at least rel·max(y), highest first.
inline std::vector<std::size_t> local_maxima(const std::vector<double>& y, double rel = 1e-3) {
    std::vector<std::size_t> out;
    if (y.size() < 3) return out;
    const double top = *std::max_element(y.begin(), y.end());
    for (std::size_t i = 1; i + 1 < y.size(); ++i) {
        if (y[i] > y[i - 1] && y[i] >= y[i + 1] && y[i] >= rel * top) out.push_back(i);
    }
    std::sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) { return y[a] > y[b]; });
    return out;
}

inline double refine_peak(const std::function<double(double)>& f, const std::vector<double>& x, std::size_t i,
                          bool refine) {
    if (!refine) return x[i];
    const double h = std::abs(x[i + 1] - x[i - 1]);
    return fit::golden_section_max(f, std::min(x[i - 1], x[i + 1]), std::max(x[i - 1], x[i + 1]), 1e-6 * h).x;
}

struct Branches {
    double lower = nan;
    double upper = nan;
    int count = 0;
};

inline Branches two_branches(const std::function<double(double)>& f, const std::vector<double>& x,
                             const std::vector<double>& y, bool refine) {
    const auto peaks = local_maxima(y);
    Branches b;
    b.count = static_cast<int>(std::min<std::size_t>(peaks.size(), 2));
    if (peaks.empty()) return b;
    if (peaks.size() == 1) {
        b.lower = b.upper = refine_peak(f, x, peaks[0], refine);
        return b;
    }
    double p = refine_peak(f, x, peaks[0], refine), q = refine_peak(f, x, peaks[1], refine);
    b.lower = std::min(p, q);
    b.upper = std::max(p, q);
    return b;
}

inline FitReport crossing_report(const std::string& name, const std::vector<double>& pump,
                                 const std::vector<Branches>& branches, double slope, double resolution,
                                 fit::AvoidedCrossing* out = nullptr) {
    std::vector<double> x, up, lo;
    for (std::size_t i = 0; i < pump.size(); ++i) {
        if (branches[i].count == 2) {
            x.push_back(pump[i]);
            up.push_back(branches[i].upper);
            lo.push_back(branches[i].lower);
        }
    }
    FitReport r;
    r.name = name;
    r.model = "avoided crossing E± = (L+F)/2 ± sqrt((L−F)²/4 + (gap/2)²), L = F + s(x − x_c)";
    if (x.size() < 4) {
        r.low_confidence = true;
        r.note = "fewer than 4 pump points show two resolved branches";
        r.add("sqrt2_g2", nan, nan, "MHz").add("g2_tilde", nan, nan, "MHz").add("gap", nan, nan, "MHz");
        return r;
    }
    const auto c = fit::avoided_crossing(x, up, lo, slope);
    if (out) *out = c;
    const double sqrt2g2 = 0.5 * c.gap;
    r.add("sqrt2_g2", units::rad_to_mhz(sqrt2g2), units::rad_to_mhz(0.5 * c.gap_error), "MHz");
    r.add("g2_tilde", units::rad_to_mhz(sqrt2g2 / std::sqrt(2.0)), units::rad_to_mhz(0.5 * c.gap_error / std::sqrt(2.0)),
          "MHz");
    r.add("gap", units::rad_to_mhz(c.gap), units::rad_to_mhz(c.gap_error), "MHz");
    r.add("crossing_pump", units::rad_to_ghz(c.crossing), nan, "GHz");
    r.add("fixed_level", units::rad_to_ghz(c.level), nan, "GHz");
    r.add("slope", c.slope, nan);
    r.residual_norm = units::rad_to_mhz(c.residual_norm);
    if (sqrt2g2 < resolution) {
        r.low_confidence = true;
        r.note = "splitting below the linewidth";
    }
    return r;
}

inline Matrix manifold_projector(HilbertSpace s, int n) {
    Matrix p = Matrix::Zero(s.dim(), s.dim());
    for (int k = 0; k < s.dim(); ++k)
        if (s.logical_of(k) + 2 * s.blockade_of(k) == n) p(k, k) = 1.0;
    return p;
}

inline Matrix logical_population(HilbertSpace s, int n) {
    Matrix p = Matrix::Zero(s.dim(), s.dim());
    for (int k = 0; k < s.dim(); ++k)
        if (s.logical_of(k) == n) p(k, k) = 1.0;
    return p;
}

inline DensityMatrix loose(HilbertSpace s, const Matrix& m) { return {s, m, StateTolerance{1e-7, 1e-8, -1e-7}}; }

inline DensityMatrix initial_state(HilbertSpace s, const NoiseRates& r) {
    return r.n_thermal > 0.0 ? DensityMatrix::thermal(s, r.n_thermal) : DensityMatrix::vacuum(s);
}

inline void absorb(lindblad::Health& h, const Matrix& rho) { h.absorb(state_health(rho)); }

}  // namespace detail

// ---- two-tone spectroscopy ----------------------------------------------------

struct TwoToneOptions {
    HilbertSpace space{3, 2};
    double probe_amplitude = -1.0;  // rad/ns; negative → 0.02 κ_b
    bool refine = true;
};

// Steady-state |⟨b⟩| for a weak probe at ω_probe with the pump at ω_p; the
// frame is chosen so the probe sits at the b frame frequency.
inline double two_tone_response(const SystemModel& model, const NoiseRates& rates, HilbertSpace space, double eps,
                                double delta, double w_probe, double w_pump) {
    DriveSettings d;
    d.delta = delta;
    d.omega_p = w_pump;
    d.omega_d = 0.5 * (w_probe + w_pump);
    d.eps_probe = eps;
    const auto h = dynamics::FrameHamiltonian(model, d, space).at(0.0);
    const auto rho = lindblad::steady_state(h, rates);
    return std::abs(expectation(rho, ladder(space, Mode::blockade)));
}

inline std::vector<double> default_two_tone_probe(const SystemModel& m, int n = 121) {
    const double half = std::max(units::mhz_to_rad(40.0), 2.5 * std::sqrt(2.0) * std::abs(m.g2_tilde));
    return linspace(m.omega_b_on() - half, m.omega_b_on() + half, n);
}

inline std::vector<double> default_pump_grid(const SystemModel& m, int n = 13) {
    const double half = std::max(units::mhz_to_rad(5.0), 2.0 * std::sqrt(2.0) * std::abs(m.g2_tilde));
    return linspace(m.optimal_pump() - half, m.optimal_pump() + half, n);
}

inline ExperimentResult two_tone_spectroscopy(const Common& c, const std::vector<double>& probe,
                                              const std::vector<double>& pump, const TwoToneOptions& opt = {}) {
    const double eps = opt.probe_amplitude > 0.0 ? opt.probe_amplitude : 0.02 * c.rates.kappa_b;
    if (!(eps < c.rates.kappa_b)) Warnings::emit("two_tone_spectroscopy: probe amplitude is not weak against kappa_b");
    const std::size_t np = pump.size(), nq = probe.size();
    std::vector<double> resp(np * nq);
    parallel_for(np * nq, c.jobs, [&](std::size_t k) {
        resp[k] = two_tone_response(c.model, c.rates, opt.space, eps, c.delta, probe[k % nq], pump[k / nq]);
    });
    std::vector<detail::Branches> branches(np);
    parallel_for(np, c.jobs, [&](std::size_t i) {
        const std::vector<double> row(resp.begin() + i * nq, resp.begin() + (i + 1) * nq);
        auto f = [&](double w) { return two_tone_response(c.model, c.rates, opt.space, eps, c.delta, w, pump[i]); };
        branches[i] = detail::two_branches(f, probe, row, opt.refine);
    });

    ExperimentResult r;
    r.name = "two_tone";
    auto ghz = [](std::vector<double> v) {
        for (auto& x : v) x = units::rad_to_ghz(x);
        return v;
    };
    Table map{"map", {{"pump", "GHz", ghz(pump)}, {"probe", "GHz", ghz(probe)}}, {}, {}};
    map.add("abs_b", resp);
    Table br{"branches", {{"pump", "GHz", ghz(pump)}}, {}, {}};
    std::vector<double> lo(np), up(np), count(np);
    for (std::size_t i = 0; i < np; ++i) {
        lo[i] = units::rad_to_ghz(branches[i].lower);
        up[i] = units::rad_to_ghz(branches[i].upper);
        count[i] = branches[i].count;
    }
    br.add("lower", lo);
    br.add("upper", up);
    br.add("peaks", count);
    r.tables = {map, br};
    r.fits.push_back(detail::crossing_report("splitting", pump, branches, -1.0,
                                             std::max(c.rates.kappa_b, c.rates.kappa_a)));
    r.metadata = base_metadata(c, opt.space);
    r.metadata["probe_amplitude_MHz"] = units::rad_to_mhz(eps);
    r.summary["injected_sqrt2_g2_MHz"] = units::rad_to_mhz(std::sqrt(2.0) * std::abs(c.model.g2_tilde));
    r.summary["fitted_sqrt2_g2_MHz"] = number_or_null(r.fits[0].value("sqrt2_g2"));
    r.summary["low_confidence"] = r.fits[0].low_confidence;
    r.validate();
    return r;
}

// ---- pump-probe spectroscopy --------------------------------------------------

struct PumpProbeOptions {
    HilbertSpace space{3, 2};
    double probe_duration = 200.0;  // ns, gaussian 4σ
    double probe_rotation = 0.2;    // rad, area of the weak probe on an ideal two-level transition
    bool refine = true;
};

// Population transferred from |1_a⟩ into the N = 2 manifold by a weak
// gaussian probe on the logical mode at ω_probe, pump on at ω_p.
inline double pump_probe_response(const Common& c, const PumpProbeOptions& opt, double w_probe, double w_pump,
                                  lindblad::Health* health = nullptr) {
    const double t = opt.probe_duration;
    const auto shape = pulses::Envelope::gaussian(0.0, t);
    auto seq = std::make_shared<pulses::PulseSequence>(t);
    seq->add(pulses::Channel::flux_pump, pulses::Envelope::square(0.0, t));
    seq->add(pulses::Channel::logical_drive,
             pulses::Envelope::gaussian(0.0, t, opt.probe_rotation / (2.0 * shape.shape_area())));
    DriveSettings d;
    d.delta = c.delta;
    d.omega_p = w_pump;
    d.omega_d = w_probe;
    d.eps_d = 1.0;
    d.sequence = seq;
    const dynamics::FrameHamiltonian frame(c.model, d, opt.space);
    SolverConfig solver = c.solver;
    solver.dt = t;
    const auto tr = lindblad::evolve(DensityMatrix::fock(opt.space, 1, 0), frame.decomposition(), c.rates, solver, 0.0, t,
                                     {detail::manifold_projector(opt.space, 2)});
    if (health) *health = tr.health;
    return tr.expectations[0].back().real();
}

inline std::vector<double> default_pump_probe_probe(const SystemModel& m, int n = 41) {
    const double center = m.omega_a_on() + m.chi_aa;
    const double half = std::max(units::mhz_to_rad(40.0), 2.5 * std::sqrt(2.0) * std::abs(m.g2_tilde));
    return linspace(center - half, center + half, n);
}

inline ExperimentResult pump_probe_spectroscopy(const Common& c, const std::vector<double>& probe,
                                                const std::vector<double>& pump, const PumpProbeOptions& opt = {}) {
    const std::size_t np = pump.size(), nq = probe.size();
    std::vector<double> resp(np * nq);
    std::vector<lindblad::Health> health(np * nq);
    parallel_for(np * nq, c.jobs,
                 [&](std::size_t k) { resp[k] = pump_probe_response(c, opt, probe[k % nq], pump[k / nq], &health[k]); });
    std::vector<detail::Branches> branches(np);
    parallel_for(np, c.jobs, [&](std::size_t i) {
        const std::vector<double> row(resp.begin() + i * nq, resp.begin() + (i + 1) * nq);
        auto f = [&](double w) { return pump_probe_response(c, opt, w, pump[i]); };
        branches[i] = detail::two_branches(f, probe, row, opt.refine);
    });

    ExperimentResult r;
    r.name = "pump_probe";
    for (const auto& h : health) r.health.absorb(h);
    auto ghz = [](std::vector<double> v) {
        for (auto& x : v) x = units::rad_to_ghz(x);
        return v;
    };
    Table map{"map", {{"pump", "GHz", ghz(pump)}, {"probe", "GHz", ghz(probe)}}, {}, {}};
    map.add("p_two_photon_manifold", resp);
    Table br{"branches", {{"pump", "GHz", ghz(pump)}}, {}, {}};
    std::vector<double> lo(np), up(np), count(np);
    for (std::size_t i = 0; i < np; ++i) {
        lo[i] = units::rad_to_ghz(branches[i].lower);
        up[i] = units::rad_to_ghz(branches[i].upper);
        count[i] = branches[i].count;
    }
    br.add("lower", lo);
    br.add("upper", up);
    br.add("peaks", count);
    r.tables = {map, br};

    fit::AvoidedCrossing crossing;
    const double linewidth = 4.0 / opt.probe_duration;
    r.fits.push_back(detail::crossing_report("avoided_crossing", pump, branches, 1.0, linewidth, &crossing));
    r.metadata = base_metadata(c, opt.space);
    r.metadata["probe_duration_ns"] = opt.probe_duration;
    r.metadata["preparation"] = "ideal |1_a> Fock state";
    r.summary["injected_sqrt2_g2_MHz"] = units::rad_to_mhz(std::sqrt(2.0) * std::abs(c.model.g2_tilde));
    r.summary["fitted_sqrt2_g2_MHz"] = number_or_null(r.fits[0].value("sqrt2_g2"));

    // Isolation of ω01 from the nearest |1⟩ → |2±⟩ line along the fitted branches.
    if (!r.fits[0].low_confidence) {
        const double w01 = c.model.omega_a_on();
        const auto fine = linspace(pump.front(), pump.back(), 401);
        std::vector<double> iso(fine.size());
        for (std::size_t i = 0; i < fine.size(); ++i)
            iso[i] = std::min(std::abs(crossing.upper(fine[i]) - w01), std::abs(crossing.lower(fine[i]) - w01));
        const auto best = std::max_element(iso.begin(), iso.end()) - iso.begin();
        double lo_w = fine[best], hi_w = fine[best];
        for (std::size_t i = 0; i < fine.size(); ++i) {
            if (iso[i] >= 0.9 * iso[best]) {
                lo_w = std::min(lo_w, fine[i]);
                hi_w = std::max(hi_w, fine[i]);
            }
        }
        r.summary["optimal_pump_window_GHz"] = {units::rad_to_ghz(lo_w), units::rad_to_ghz(hi_w)};
        r.summary["max_isolation_MHz"] = units::rad_to_mhz(iso[best]);
    }
    r.validate();
    return r;
}

// ---- coupling vs modulation amplitude -------------------------------------------

struct G2SweepOptions {
    TwoToneOptions two_tone;
    int probe_points = 121;
    int pump_points = 9;
};

inline ExperimentResult g2_vs_amplitude(const circuit::CircuitParams& params, const Common& base,
                                        const std::vector<double>& deltas, const G2SweepOptions& opt = {}) {
    Axis ax{"delta", "phi0", deltas};
    ax.validate();
    std::vector<double> fitted(deltas.size()), err(deltas.size()), injected(deltas.size());
    std::vector<double> low(deltas.size());
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        Common c = base;
        c.delta = deltas[i];
        c.model = SystemModel::from_circuit(params, deltas[i]);
        const double g = std::sqrt(2.0) * std::abs(c.model.g2_tilde);
        const double half_probe = 3.5 * g + 10.0 * c.rates.kappa_b;
        const auto probe = linspace(c.model.omega_b_on() - half_probe, c.model.omega_b_on() + half_probe, opt.probe_points);
        const double half_pump = std::max(2.0 * g, 5.0 * c.rates.kappa_b);
        const auto pump = linspace(c.model.optimal_pump() - half_pump, c.model.optimal_pump() + half_pump, opt.pump_points);
        const auto tt = two_tone_spectroscopy(c, probe, pump, opt.two_tone);
        const auto& f = tt.fits[0];
        fitted[i] = f.value("g2_tilde");
        err[i] = f.error("g2_tilde");
        injected[i] = units::rad_to_mhz(std::abs(c.model.g2_tilde));
        low[i] = f.low_confidence ? 1.0 : 0.0;
    }
    ExperimentResult r;
    r.name = "g2_sweep";
    Table t{"g2", {ax}, {}, {}};
    t.add("g2_tilde_MHz", fitted);
    t.add("g2_tilde_error_MHz", err);
    t.add("g2_tilde_injected_MHz", injected);
    t.add("low_confidence", low);
    r.tables = {t};

    std::vector<double> x, y;
    for (std::size_t i = 0; i < deltas.size(); ++i)
        if (std::isfinite(fitted[i])) {
            x.push_back(deltas[i]);
            y.push_back(fitted[i]);
        }
    FitReport lin;
    lin.name = "linear";
    lin.model = "g2_tilde = slope·delta + intercept";
    if (x.size() >= 3) {
        const auto lf = fit::linear(x, y);
        lin.add("slope", lf.slope, lf.slope_error, "MHz/phi0");
        lin.add("intercept", lf.intercept, lf.intercept_error, "MHz");
        lin.add("r_squared", lf.r_squared, nan);
        lin.residual_norm = lf.residual_norm;
    } else {
        lin.low_confidence = true;
        lin.note = "fewer than 3 calibrated points";
        lin.add("slope", nan, nan, "MHz/phi0").add("intercept", nan, nan, "MHz").add("r_squared", nan, nan);
    }
    r.fits.push_back(lin);
    const double dg2 = circuit::dg2_dflux(params, 0.0);
    r.summary["dg2_dflux_MHz_per_phi0"] = units::rad_to_mhz(std::abs(dg2));
    const double d25 = dynamics::delta_for_coupling(params, units::mhz_to_rad(25.0));
    r.summary["delta_for_25MHz_phi0"] = d25;
    r.summary["sqrt2_g2_at_top_MHz"] = number_or_null(std::sqrt(2.0) * fitted.back());
    r.metadata = base_metadata(base, opt.two_tone.space);
    r.validate();
    return r;
}

// ---- Rabi chevron -----------------------------------------------------------------

struct ChevronOptions {
    HilbertSpace space{4, 2};
    double duration = 1000.0;  // ns, gaussian 4σ
};

struct ChevronPoint {
    double n_a = 0.0;
    double homodyne = 0.0;  // selective readout of the one-photon peak
    lindblad::Health health;
};

// Pump on at ω_p (optimal by default), gaussian logical drive at (ω_d, ε),
// readout after the pump is switched off.
class ChevronSimulator {
public:
    ChevronSimulator(Common c, ChevronOptions opt, std::optional<double> pump = std::nullopt)
        : c_(std::move(c)), opt_(opt), pump_(pump.value_or(c_.model.optimal_pump())) {}

    double pump() const { return pump_; }

    ChevronPoint operator()(double w_drive, double amplitude) const {
        const double t = opt_.duration;
        auto seq = std::make_shared<pulses::PulseSequence>(t);
        seq->add(pulses::Channel::flux_pump, pulses::Envelope::square(0.0, t));
        seq->add(pulses::Channel::logical_drive, pulses::Envelope::gaussian(0.0, t, amplitude));
        DriveSettings d;
        d.delta = c_.delta;
        d.omega_p = pump_;
        d.omega_d = w_drive;
        d.eps_d = 1.0;
        d.sequence = seq;
        const dynamics::FrameHamiltonian frame(c_.model, d, opt_.space);
        SolverConfig solver = c_.solver;
        solver.dt = t;
        const auto tr = lindblad::evolve(detail::initial_state(opt_.space, c_.rates), frame.decomposition(), c_.rates,
                                         solver, 0.0, t, {number(opt_.space, Mode::logical).matrix()});
        ChevronPoint p;
        p.n_a = tr.expectations[0].back().real();
        const auto readout = tomography::ReadoutModel::selective(c_.model.chi_ab, c_.rates.kappa_a, c_.rates.kappa_b);
        p.homodyne = tomography::number_resolved_readout(tr.final_density().reduced_logical(), 1, readout);
        p.health = tr.health;
        return p;
    }

private:
    Common c_;
    ChevronOptions opt_;
    double pump_;
};

struct Resonance {
    double center = nan;  // rad/ns
    double fwhm = nan;    // rad/ns
    double height = nan;
};

struct ChevronResonances {
    Resonance single;
    Resonance two_minus;
    Resonance two_plus;
    double oracle_01 = nan;
    double oracle_02_minus_half = nan;
    double oracle_02_plus_half = nan;
};

// Two-photon lines are eigenvalues of the pump-dressed Hamiltonian (drive off)
// in the pump frame: ω_d = 0 leaves ω′_a and ω′_b + ω_p on the diagonal.
inline ChevronResonances chevron_oracle(const SystemModel& model, HilbertSpace space, double pump, double delta) {
    DriveSettings d;
    d.delta = delta;
    d.omega_p = pump;
    d.omega_d = 0.0;
    const auto tr = dynamics::transitions(dynamics::eigenspectrum(model, d, space), space);
    ChevronResonances out;
    out.oracle_01 = tr.omega_01;
    out.oracle_02_minus_half = 0.5 * tr.omega_02_minus;
    out.oracle_02_plus_half = 0.5 * tr.omega_02_plus;
    return out;
}

namespace detail {

// Lorentzian fit of a fine scan around a coarse peak position.
inline Resonance resolve_peak(const std::function<double(double)>& f, double guess, double half_span, int points) {
    const auto x = linspace(guess - half_span, guess + half_span, points);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    const auto l = fit::lorentzian(x, y);
    Resonance r;
    r.center = l.params(1);
    r.fwhm = std::abs(l.params(2));
    r.height = l.params(0);
    return r;
}

}  // namespace detail

// Coarse cut over drive frequency at one amplitude: ω01 is the strongest peak,
// the outermost peaks on either side are the two-photon lines. Each is then
// resolved by a local Lorentzian fit.
inline ChevronResonances locate_chevron_resonances(const ChevronSimulator& sim, const Common& c,
                                                   const ChevronOptions& opt, double amplitude,
                                                   const std::vector<double>& coarse, double fine_half_span,
                                                   int fine_points = 41) {
    auto f = [&](double w) { return sim(w, amplitude).n_a; };
    std::vector<double> y(coarse.size());
    parallel_for(coarse.size(), c.jobs, [&](std::size_t i) { y[i] = f(coarse[i]); });
    auto out = chevron_oracle(c.model, opt.space, sim.pump(), c.delta);
    const auto peaks = detail::local_maxima(y, 0.02);
    if (peaks.empty()) throw NumericalError("locate_chevron_resonances: no peaks in the coarse cut");
    const std::size_t main = peaks.front();
    std::size_t left = main, right = main;
    for (auto p : peaks) {
        if (coarse[p] < coarse[left]) left = p;
        if (coarse[p] > coarse[right]) right = p;
    }
    out.single = detail::resolve_peak(f, coarse[main], fine_half_span, fine_points);
    if (left != main) out.two_minus = detail::resolve_peak(f, coarse[left], fine_half_span, fine_points);
    if (right != main) out.two_plus = detail::resolve_peak(f, coarse[right], fine_half_span, fine_points);
    return out;
}

inline std::vector<double> default_chevron_frequencies(const SystemModel& m, int n = 41) {
    const double half = std::max(units::mhz_to_rad(20.0), 0.8 * std::sqrt(2.0) * std::abs(m.g2_tilde));
    return linspace(m.omega_a_on() - half, m.omega_a_on() + half, n);
}

inline std::vector<double> default_chevron_amplitudes(const ChevronOptions& opt, int n = 5) {
    const double pi_amp = pulses::ideal_pi_amplitude(pulses::Envelope::gaussian(0.0, opt.duration));
    return linspace(pi_amp, 8.0 * pi_amp, n);
}

inline ExperimentResult rabi_chevron(const Common& c, const std::vector<double>& freqs,
                                     const std::vector<double>& amplitudes, const ChevronOptions& opt = {}) {
    const ChevronSimulator sim(c, opt);
    const std::size_t na = amplitudes.size(), nf = freqs.size();
    std::vector<ChevronPoint> pts(na * nf);
    parallel_for(na * nf, c.jobs, [&](std::size_t k) { pts[k] = sim(freqs[k % nf], amplitudes[k / nf]); });
    ExperimentResult r;
    r.name = "rabi_chevron";
    std::vector<double> amp_mhz(na), f_ghz(nf), n(na * nf), v(na * nf);
    for (std::size_t i = 0; i < na; ++i) amp_mhz[i] = units::rad_to_mhz(amplitudes[i]);
    for (std::size_t i = 0; i < nf; ++i) f_ghz[i] = units::rad_to_ghz(freqs[i]);
    for (std::size_t k = 0; k < pts.size(); ++k) {
        n[k] = pts[k].n_a;
        v[k] = pts[k].homodyne;
        r.health.absorb(pts[k].health);
    }
    Table map{"map", {{"amplitude", "MHz", amp_mhz}, {"drive", "GHz", f_ghz}}, {}, {}};
    map.add("n_a", n);
    map.add("homodyne_proxy", v);
    r.tables = {map};
    const auto oracle = chevron_oracle(c.model, opt.space, sim.pump(), c.delta);
    r.summary["omega01_GHz"] = units::rad_to_ghz(oracle.oracle_01);
    r.summary["omega02_minus_half_GHz"] = units::rad_to_ghz(oracle.oracle_02_minus_half);
    r.summary["omega02_plus_half_GHz"] = units::rad_to_ghz(oracle.oracle_02_plus_half);
    r.summary["pump_GHz"] = units::rad_to_ghz(sim.pump());
    // on-resonance cut: peak height vs amplitude
    std::size_t i01 = 0;
    for (std::size_t i = 1; i < nf; ++i)
        if (std::abs(freqs[i] - oracle.oracle_01) < std::abs(freqs[i01] - oracle.oracle_01)) i01 = i;
    std::vector<double> cut(na);
    for (std::size_t i = 0; i < na; ++i) cut[i] = n[i * nf + i01];
    r.summary["resonant_cut_n_a"] = cut;
    r.metadata = base_metadata(c, opt.space);
    r.metadata["drive_duration_ns"] = opt.duration;
    r.validate();
    return r;
}

// ---- Rabi frequency and linewidth vs amplitude ------------------------------------

struct RabiOptions {
    HilbertSpace space{3, 2};
    double duration = 2000.0;  // ns, square drive
    double sample_dt = 2.0;
};

inline ExperimentResult rabi_frequency_vs_amplitude(const Common& c, const std::vector<double>& amplitudes,
                                                    const RabiOptions& opt = {}) {
    const std::size_t na = amplitudes.size();
    std::vector<double> omega(na, nan), omega_err(na, nan);
    std::vector<lindblad::Health> health(na);
    std::vector<std::string> notes(na);
    parallel_for(na, c.jobs, [&](std::size_t i) {
        DriveSettings d;
        d.delta = c.delta;
        d.omega_p = c.model.optimal_pump();
        d.omega_d = c.model.omega_a_on();
        d.eps_d = amplitudes[i];
        const auto h = dynamics::FrameHamiltonian(c.model, d, opt.space).decomposition();
        SolverConfig solver = c.solver;
        solver.dt = opt.sample_dt;
        const auto tr = lindblad::evolve(detail::initial_state(opt.space, c.rates), h, c.rates, solver, 0.0, opt.duration,
                                         {number(opt.space, Mode::logical).matrix()});
        health[i] = tr.health;
        const auto y = tr.real(0);
        // first interior minimum → half period
        double t_min = opt.duration;
        for (std::size_t k = 1; k + 1 < y.size(); ++k)
            if (y[k] < y[k - 1] && y[k] <= y[k + 1] && y[k] < 0.5 * *std::max_element(y.begin(), y.end())) {
                t_min = tr.times[k];
                break;
            }
        const auto f = fit::damped_cosine(tr.times, y, M_PI / t_min, 1.0 / std::max(c.rates.kappa_a, 1e-9));
        omega[i] = std::abs(f.params(2));
        omega_err[i] = f.errors(2);
    });
    ExperimentResult r;
    r.name = "rabi_frequency";
    std::vector<double> amp_mhz(na), om_mhz(na), om_err(na);
    for (std::size_t i = 0; i < na; ++i) {
        amp_mhz[i] = units::rad_to_mhz(amplitudes[i]);
        om_mhz[i] = units::rad_to_mhz(omega[i]);
        om_err[i] = units::rad_to_mhz(omega_err[i]);
        r.health.absorb(health[i]);
    }
    Table t{"rabi", {{"amplitude", "MHz", amp_mhz}}, {}, {}};
    t.add("rabi_frequency_MHz", om_mhz);
    t.add("rabi_frequency_error_MHz", om_err);
    r.tables = {t};
    const auto lf = fit::linear(amplitudes, omega);
    FitReport lin;
    lin.name = "linear";
    lin.model = "Omega = slope·epsilon + intercept";
    lin.add("slope", lf.slope, lf.slope_error).add("intercept", units::rad_to_mhz(lf.intercept),
                                                   units::rad_to_mhz(lf.intercept_error), "MHz");
    lin.add("r_squared", lf.r_squared, nan);
    lin.residual_norm = units::rad_to_mhz(lf.residual_norm);
    r.fits.push_back(lin);
    r.metadata = base_metadata(c, opt.space);
    r.validate();
    return r;
}

struct FwhmOptions {
    HilbertSpace space{3, 2};
    int points = 41;
    double strong_drive = 3.0;  // Ω·sqrt(T1·T2) above which a point enters the linear regression
};

// Bloch reference for the two-level steady state: FWHM (angular) of the
// excited population vs detuning.
inline double bloch_fwhm(double omega_rabi, double t1, double t2) {
    return 2.0 * std::sqrt(1.0 / (t2 * t2) + omega_rabi * omega_rabi * t1 / t2);
}

inline double steady_population(const Common& c, HilbertSpace space, double amplitude, double detuning) {
    DriveSettings d;
    d.delta = c.delta;
    d.omega_p = c.model.optimal_pump();
    d.omega_d = c.model.omega_a_on() + detuning;
    d.eps_d = amplitude;
    const auto h = dynamics::FrameHamiltonian(c.model, d, space).at(0.0);
    return expectation(lindblad::steady_state(h, c.rates), number(space, Mode::logical)).real();
}

inline ExperimentResult fwhm_vs_amplitude(const Common& c, const std::vector<double>& amplitudes,
                                          const FwhmOptions& opt = {}) {
    const double t1 = 1.0 / c.rates.kappa_a;
    const double t2 = 1.0 / (0.5 * c.rates.kappa_a + c.rates.kappa_phi_a);
    const std::size_t na = amplitudes.size();
    std::vector<double> fwhm(na, nan), err(na, nan), spans(na, nan);
    std::vector<std::string> notes(na);
    parallel_for(na, c.jobs, [&](std::size_t i) {
        double half = 2.0 * (1.0 / t2 + 2.0 * amplitudes[i]);
        for (int attempt = 0; attempt < 6; ++attempt) {
            const auto x = linspace(-half, half, opt.points);
            std::vector<double> y(x.size());
            for (std::size_t k = 0; k < x.size(); ++k) y[k] = steady_population(c, opt.space, amplitudes[i], x[k]);
            try {
                const auto l = fit::lorentzian(x, y);
                const double w = std::abs(l.params(2));
                if (!std::isfinite(w)) throw NumericalError("non-finite width");
                if (w > 0.8 * half) {
                    half *= 2.0;
                    continue;
                }
                if (w < 0.1 * half) {
                    half *= 0.3;
                    continue;
                }
                fwhm[i] = w;
                err[i] = l.errors(2);
                spans[i] = half;
                return;
            } catch (const std::exception& e) {
                notes[i] = e.what();
                return;
            }
        }
        notes[i] = "width not bracketed";
    });
    ExperimentResult r;
    r.name = "fwhm";
    std::vector<double> amp_mhz(na), w_mhz(na), e_mhz(na), bloch(na);
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < na; ++i) {
        amp_mhz[i] = units::rad_to_mhz(amplitudes[i]);
        w_mhz[i] = units::rad_to_mhz(fwhm[i]);
        e_mhz[i] = units::rad_to_mhz(err[i]);
        const double om = 2.0 * amplitudes[i];
        bloch[i] = units::rad_to_mhz(bloch_fwhm(om, t1, t2));
        if (!notes[i].empty()) r.warnings.push_back("fwhm: amplitude " + std::to_string(amp_mhz[i]) + " MHz excluded: " + notes[i]);
        if (std::isfinite(fwhm[i]) && om * std::sqrt(t1 * t2) >= opt.strong_drive) {
            xs.push_back(om);
            ys.push_back(fwhm[i] / (2.0 * M_PI));
        }
    }
    Table t{"fwhm", {{"amplitude", "MHz", amp_mhz}}, {}, {}};
    t.add("fwhm_MHz", w_mhz);
    t.add("fwhm_error_MHz", e_mhz);
    t.add("bloch_fwhm_MHz", bloch);
    r.tables = {t};
    FitReport lin;
    lin.name = "strong_drive";
    lin.model = "FWHM/2π = slope·Omega + intercept, Omega = 2·epsilon";
    if (xs.size() >= 3) {
        const auto lf = fit::linear(xs, ys);
        lin.add("slope", lf.slope, lf.slope_error).add("intercept", lf.intercept * 1e3, lf.intercept_error * 1e3, "MHz");
        lin.add("r_squared", lf.r_squared, nan);
        lin.residual_norm = lf.residual_norm * 1e3;
    } else {
        lin.low_confidence = true;
        lin.note = "fewer than 3 strong-drive points";
        lin.add("slope", nan, nan).add("intercept", nan, nan, "MHz").add("r_squared", nan, nan);
    }
    r.fits.push_back(lin);
    r.summary["bloch_slope"] = std::sqrt(t1 / t2) / M_PI;
    r.summary["t1_us"] = t1 * 1e-3;
    r.summary["t2_us"] = t2 * 1e-3;
    r.summary["undriven_fwhm_MHz"] = units::rad_to_mhz(2.0 / t2);
    r.metadata = base_metadata(c, opt.space);
    r.validate();
    return r;
}

// ---- coherence suite ----------------------------------------------------------------

// Logical-mode pulses (pump on, gaussian 4σ) and idle periods for one noise
// realization. The realized model may carry a static detuning of the logical
// mode; drive frequencies follow the nominal model.
class PulsedOscillator {
public:
    PulsedOscillator(const Common& c, HilbertSpace space, double pulse_duration, double detuning = 0.0)
        : c_(c), space_(space), duration_(pulse_duration), realized_(c.model) {
        realized_.omega_a += detuning;
        drive_.delta = c.delta;
        drive_.omega_d = c.model.omega_a_on();
        drive_.omega_p = c.model.optimal_pump();
        DriveSettings on = drive_, off = drive_;
        off.pump_level = 0.0;
        idle_on_ = std::make_shared<lindblad::StaticPropagator>(dynamics::FrameHamiltonian(realized_, on, space).at(0.0),
                                                                c.rates);
        idle_off_ = std::make_shared<lindblad::StaticPropagator>(
            dynamics::FrameHamiltonian(realized_, off, space).at(0.0), c.rates);
    }

    HilbertSpace space() const { return space_; }
    Matrix initial() const { return detail::initial_state(space_, c_.rates).matrix(); }

    Matrix pulse(const Matrix& rho, double amplitude, double phase) const {
        auto seq = std::make_shared<pulses::PulseSequence>(duration_);
        seq->add(pulses::Channel::flux_pump, pulses::Envelope::square(0.0, duration_));
        seq->add(pulses::Channel::logical_drive, pulses::Envelope::gaussian(0.0, duration_, amplitude, phase));
        DriveSettings d = drive_;
        d.eps_d = 1.0;
        d.sequence = seq;
        SolverConfig solver = c_.solver;
        solver.dt = duration_;
        const auto tr = lindblad::evolve(detail::loose(space_, rho), dynamics::FrameHamiltonian(realized_, d, space_).decomposition(),
                                         c_.rates, solver, 0.0, duration_);
        health_.absorb(tr.health);
        return tr.final_state;
    }

    Matrix idle(const Matrix& rho, double t, bool pump_on) const {
        const Matrix out = (pump_on ? idle_on_ : idle_off_)->apply(rho, t);
        detail::absorb(health_, out);
        return out;
    }

    double p1(const Matrix& rho) const {
        double p = 0.0;
        for (int ib = 0; ib < space_.n_b; ++ib) p += rho(space_.index(1, ib), space_.index(1, ib)).real();
        return p;
    }

    pulses::PiCalibration calibrate() const {
        const auto shape = pulses::Envelope::gaussian(0.0, duration_);
        return pulses::calibrate_pi_pulse(
            shape, [&](const pulses::Envelope& e) { return p1(pulse(initial(), e.amplitude, 0.0)); }, std::nullopt, 1e-6);
    }

    const lindblad::Health& health() const { return health_; }

private:
    Common c_;
    HilbertSpace space_;
    double duration_;
    SystemModel realized_;
    DriveSettings drive_;
    std::shared_ptr<lindblad::StaticPropagator> idle_on_, idle_off_;
    mutable lindblad::Health health_;
};

enum class NoiseAverage { quadrature, monte_carlo };

struct CoherenceOptions {
    HilbertSpace space{3, 2};
    double pulse_duration = 100.0;    // ns, gaussian 4σ
    double quasi_static_sigma = 0.0;  // rad/ns, gaussian detuning of the logical mode
    NoiseAverage average = NoiseAverage::quadrature;
    int quadrature_nodes = 16;
    int realizations = 200;  // monte_carlo only
};

namespace detail {

struct Realization {
    double detuning = 0.0;
    double weight = 1.0;
};

// Gauss–Hermite rule for a standard normal weight (Golub–Welsch).
inline std::vector<Realization> gauss_hermite(int n) {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) j(k, k - 1) = j(k - 1, k) = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
    std::vector<Realization> out(n);
    for (int k = 0; k < n; ++k) out[k] = {es.eigenvalues()(k), es.eigenvectors()(0, k) * es.eigenvectors()(0, k)};
    return out;
}

inline std::vector<Realization> realization_detunings(const Common& c, const CoherenceOptions& opt) {
    if (!(opt.quasi_static_sigma > 0.0)) return {{0.0, 1.0}};
    std::vector<Realization> out;
    if (opt.average == NoiseAverage::quadrature) {
        if (opt.quadrature_nodes < 1) throw std::invalid_argument("quadrature_nodes must be >= 1");
        out = gauss_hermite(opt.quadrature_nodes);
        for (auto& r : out) r.detuning *= opt.quasi_static_sigma;
        return out;
    }
    if (opt.realizations < 1) throw std::invalid_argument("realizations must be >= 1");
    std::mt19937_64 rng(c.seed);
    std::normal_distribution<double> g(0.0, opt.quasi_static_sigma);
    out.resize(opt.realizations);
    for (auto& r : out) r = {g(rng), 1.0 / opt.realizations};
    return out;
}

inline std::vector<double> us(const std::vector<double>& ns) {
    std::vector<double> out(ns);
    for (auto& v : out) v *= 1e-3;
    return out;
}

inline bool flat(const std::vector<double>& y, double tol = 1e-9) {
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    return *hi - *lo < tol;
}

}  // namespace detail

// P₀(τ) after an ideal coherent displacement α₀, no flux modulation.
inline ExperimentResult coherent_state_decay(const Common& c, cplx alpha0, const std::vector<double>& delays,
                                             HilbertSpace space = {40, 2}) {
    Axis ax{"delay", "us", detail::us(delays)};
    ax.validate();
    if (delays.front() < 0.0) throw std::invalid_argument("coherent_state_decay: delays must be >= 0");
    DriveSettings d;
    d.delta = 0.0;
    d.omega_d = c.model.omega_a;
    d.omega_p = 2.0 * c.model.omega_a - c.model.omega_b;
    d.pump_level = 0.0;
    const auto h = dynamics::FrameHamiltonian(c.model, d, space).at(0.0);
    const Matrix rho0 = DensityMatrix::coherent(space, alpha0).matrix();
    std::vector<double> p0;
    ExperimentResult r;
    r.name = "coherent_decay";
    auto vacuum_a = [&](const Eigen::VectorXd& pops) {
        double pop = 0.0;
        for (int ib = 0; ib < space.n_b; ++ib) pop += pops(space.index(0, ib));
        return pop;
    };
    if (const auto w = lindblad::population_rate_matrix(h, c.rates)) {
        const Eigen::VectorXd start = rho0.diagonal().real();
        for (double tau : delays) {
            const Eigen::VectorXd pops = (*w * tau).exp() * start;
            p0.push_back(vacuum_a(pops));
            detail::absorb(r.health, Matrix(pops.cast<cplx>().asDiagonal()));
        }
        r.health.duration_us = 1e-3 * delays.back();
        r.metadata["propagation"] = "population sector, matrix exponential";
    } else {
        SolverConfig solver = c.solver;
        Matrix rho = rho0;
        double t = 0.0;
        for (double tau : delays) {
            if (tau > t) {
                solver.dt = tau - t;
                const auto tr = lindblad::evolve(detail::loose(space, rho), h, c.rates, solver, t, tau);
                r.health.absorb(tr.health);
                rho = 0.5 * (tr.final_state + tr.final_state.adjoint());
                t = tau;
            }
            p0.push_back(vacuum_a(rho.diagonal().real()));
        }
        r.metadata["propagation"] = "full master equation";
    }
    Table tab{"p0", {ax}, {}, {}};
    tab.add("p0", p0);
    r.tables = {tab};

    FitReport f;
    f.name = "decay";
    f.model = "P0 = exp(-A·exp(-kappa·tau))";
    // linearized guess: ln(−ln P0) = ln A − κτ
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < delays.size(); ++i)
        if (p0[i] > 0.0 && p0[i] < 1.0 - 1e-9) {
            xs.push_back(delays[i]);
            ys.push_back(std::log(-std::log(p0[i])));
        }
    if (xs.size() >= 3 && !detail::flat(p0)) {
        const auto lf = fit::linear(xs, ys);
        Eigen::VectorXd p(2);
        p << std::exp(lf.intercept), -lf.slope;
        fit::Model m = [](const Eigen::VectorXd& q, double x) { return std::exp(-q(0) * std::exp(-q(1) * x)); };
        const auto nl = fit::least_squares(m, delays, p0, p, {"A", "kappa"});
        f.add("alpha_sq", nl.params(0), nl.errors(0));
        f.add("kappa", units::rad_to_khz(nl.params(1)), units::rad_to_khz(nl.errors(1)), "kHz");
        f.add("t_kappa", 1e-3 / nl.params(1), 1e-3 * nl.errors(1) / (nl.params(1) * nl.params(1)), "us");
        f.residual_norm = nl.residual_norm;
    } else {
        f.low_confidence = true;
        f.note = "no decay resolved";
        f.add("alpha_sq", nan, nan).add("kappa", nan, nan, "kHz").add("t_kappa", nan, nan, "us");
    }
    r.fits.push_back(f);
    r.summary["p0_at_zero"] = p0.front();
    r.summary["injected_kappa_kHz"] = units::rad_to_khz(c.rates.kappa_a);
    const json prop = r.metadata["propagation"];
    r.metadata = base_metadata(c, space);
    r.metadata["propagation"] = prop;
    r.metadata["alpha0"] = {alpha0.real(), alpha0.imag()};
    r.validate();
    return r;
}

inline FitReport exponential_report(const std::string& name, const std::vector<double>& delays_ns,
                                    const std::vector<double>& y, bool with_offset) {
    FitReport f;
    f.name = name;
    f.model = with_offset ? "A·exp(-tau/T) + c" : "A·exp(-tau/T)";
    if (detail::flat(y)) {
        f.low_confidence = true;
        f.note = "flat trace";
        f.add("T", INFINITY, nan, "us").add("amplitude", y.front(), nan);
        f.residual_norm = 0.0;
        return f;
    }
    const auto e = fit::exponential(delays_ns, y, with_offset);
    f.add("T", e.params(1) * 1e-3, e.errors(1) * 1e-3, "us").add("amplitude", e.params(0), e.errors(0));
    if (with_offset) f.add("offset", e.params(2), e.errors(2));
    f.residual_norm = e.residual_norm;
    return f;
}

// Calibrated π_y with pump on, pump off during the delay.
inline ExperimentResult t1_experiment(const Common& c, const std::vector<double>& delays, const CoherenceOptions& opt = {}) {
    Axis ax{"delay", "us", detail::us(delays)};
    ax.validate();
    const PulsedOscillator osc(c, opt.space, opt.pulse_duration);
    const auto cal = osc.calibrate();
    const Matrix excited = osc.pulse(osc.initial(), cal.pi_amplitude, M_PI / 2);
    std::vector<double> p1(delays.size());
    for (std::size_t i = 0; i < delays.size(); ++i) p1[i] = osc.p1(osc.idle(excited, delays[i], false));
    ExperimentResult r;
    r.name = "t1";
    Table t{"t1", {ax}, {}, {}};
    t.add("p1", p1);
    r.tables = {t};
    r.fits.push_back(exponential_report("decay", delays, p1, true));
    r.health = osc.health();
    r.summary["pi_amplitude_MHz"] = units::rad_to_mhz(cal.pi_amplitude);
    r.summary["pure_loss_t1_us"] = 1e-3 / c.rates.kappa_a;
    r.metadata = base_metadata(c, opt.space);
    r.metadata["pulse_duration_ns"] = opt.pulse_duration;
    r.validate();
    return r;
}

// π/2_y – τ – π/2 with azimuth π/2 + ω_fr·τ. The signal is the population
// difference between the two final azimuths φ and φ + π.
inline ExperimentResult ramsey_experiment(const Common& c, const std::vector<double>& delays, double fringe,
                                          const CoherenceOptions& opt = {}) {
    Axis ax{"delay", "us", detail::us(delays)};
    ax.validate();
    const double tau_max = *std::max_element(delays.begin(), delays.end());
    ExperimentResult r;
    r.name = "ramsey";
    if (fringe < 2.0 / tau_max) {
        const std::string w = "ramsey: fringe frequency below 2/tau_max, damped-cosine fit is underdetermined";
        Warnings::emit(w);
        r.warnings.push_back(w);
    }
    const PulsedOscillator nominal(c, opt.space, opt.pulse_duration);
    const auto cal = nominal.calibrate();
    const auto detunings = detail::realization_detunings(c, opt);
    std::vector<std::vector<double>> signal(detunings.size(), std::vector<double>(delays.size()));
    std::vector<lindblad::Health> health(detunings.size());
    parallel_for(detunings.size(), c.jobs, [&](std::size_t k) {
        const PulsedOscillator osc(c, opt.space, opt.pulse_duration, detunings[k].detuning);
        const Matrix first = osc.pulse(osc.initial(), cal.half_pi_amplitude, M_PI / 2);
        for (std::size_t i = 0; i < delays.size(); ++i) {
            const Matrix waited = osc.idle(first, delays[i], true);
            const double phi = M_PI / 2 + fringe * delays[i];
            signal[k][i] = osc.p1(osc.pulse(waited, cal.half_pi_amplitude, phi)) -
                           osc.p1(osc.pulse(waited, cal.half_pi_amplitude, phi + M_PI));
        }
        health[k] = osc.health();
    });
    std::vector<double> s(delays.size(), 0.0);
    for (std::size_t k = 0; k < detunings.size(); ++k) {
        r.health.absorb(health[k]);
        for (std::size_t i = 0; i < delays.size(); ++i) s[i] += signal[k][i] * detunings[k].weight;
    }
    Table t{"ramsey", {ax}, {}, {}};
    t.add("contrast", s);
    r.tables = {t};

    FitReport f;
    f.name = "damped_cosine";
    f.model = "A·exp(-tau/T2*)·cos(omega·tau + phase) + c";
    const auto dc = fit::damped_cosine(delays, s, fringe, 0.3 * tau_max);
    f.add("T2_star", dc.params(1) * 1e-3, dc.errors(1) * 1e-3, "us");
    f.add("fringe", units::rad_to_mhz(dc.params(2)), units::rad_to_mhz(dc.errors(2)), "MHz");
    f.add("amplitude", dc.params(0), dc.errors(0)).add("phase", dc.params(3), dc.errors(3)).add("offset", dc.params(4), dc.errors(4));
    f.residual_norm = dc.residual_norm;
    r.fits.push_back(f);
    const double t1 = 1.0 / c.rates.kappa_a;
    const double predicted = 1.0 / (0.5 / t1 + c.rates.kappa_phi_a);
    r.summary["predicted_T2_star_us"] = predicted * 1e-3;
    r.summary["relation_deviation"] = dc.params(1) / predicted - 1.0;
    r.summary["fringe_set_MHz"] = units::rad_to_mhz(fringe);
    r.summary["realizations"] = detunings.size();
    r.metadata = base_metadata(c, opt.space);
    r.metadata["quasi_static_sigma_MHz"] = units::rad_to_mhz(opt.quasi_static_sigma);
    r.metadata["noise_average"] = opt.average == NoiseAverage::quadrature ? "gauss-hermite" : "monte-carlo";
    r.validate();
    return r;
}

// π/2_y – τ/2 – π_y – τ/2 – π/2_{±y}; signal is P1(−y) − P1(+y).
inline ExperimentResult echo_experiment(const Common& c, const std::vector<double>& delays, const CoherenceOptions& opt = {}) {
    Axis ax{"delay", "us", detail::us(delays)};
    ax.validate();
    ExperimentResult r;
    r.name = "echo";
    const PulsedOscillator nominal(c, opt.space, opt.pulse_duration);
    const auto cal = nominal.calibrate();
    const auto detunings = detail::realization_detunings(c, opt);
    std::vector<std::vector<double>> signal(detunings.size(), std::vector<double>(delays.size()));
    std::vector<lindblad::Health> health(detunings.size());
    parallel_for(detunings.size(), c.jobs, [&](std::size_t k) {
        const PulsedOscillator osc(c, opt.space, opt.pulse_duration, detunings[k].detuning);
        const Matrix first = osc.pulse(osc.initial(), cal.half_pi_amplitude, M_PI / 2);
        for (std::size_t i = 0; i < delays.size(); ++i) {
            const Matrix a = osc.idle(first, 0.5 * delays[i], true);
            const Matrix b = osc.pulse(a, cal.pi_amplitude, M_PI / 2);
            const Matrix m = osc.idle(b, 0.5 * delays[i], true);
            signal[k][i] = osc.p1(osc.pulse(m, cal.half_pi_amplitude, -M_PI / 2)) -
                           osc.p1(osc.pulse(m, cal.half_pi_amplitude, M_PI / 2));
        }
        health[k] = osc.health();
    });
    std::vector<double> s(delays.size(), 0.0);
    for (std::size_t k = 0; k < detunings.size(); ++k) {
        r.health.absorb(health[k]);
        for (std::size_t i = 0; i < delays.size(); ++i) s[i] += signal[k][i] * detunings[k].weight;
    }
    Table t{"echo", {ax}, {}, {}};
    t.add("contrast", s);
    r.tables = {t};
    r.fits.push_back(exponential_report("decay", delays, s, false));
    const double t1 = 1.0 / c.rates.kappa_a;
    const double t2e = r.fits[0].value("T") * 1e3;
    r.summary["t2e_over_t1"] = t2e / t1;
    const double rate = 1.0 / t2e - 0.5 / t1;
    r.summary["echo_dephasing_time_us"] = rate > 0.0 ? json(1e-3 / rate) : json("inf");
    r.summary["zero_delay_contrast"] = s.front();
    r.summary["realizations"] = detunings.size();
    r.metadata = base_metadata(c, opt.space);
    r.metadata["quasi_static_sigma_MHz"] = units::rad_to_mhz(opt.quasi_static_sigma);
    r.metadata["noise_average"] = opt.average == NoiseAverage::quadrature ? "gauss-hermite" : "monte-carlo";
    r.validate();
    return r;
}

// Gaussian quasi-static detuning producing a Ramsey envelope exp(−(τ/T_φ)²).
inline double quasi_static_sigma_for(double t_phi) { return std::sqrt(2.0) / t_phi; }

}  // namespace stimosc::experiments
