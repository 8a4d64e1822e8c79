#pragma once

// Run configuration: sectioned key-value files (YAML, or JSON), unit-suffixed
// keys, strict schema, defaults for absent sections, `section.key=value`
// overrides and a content hash of the resolved values.

#include <yaml-cpp/yaml.h>

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stimosc/circuit_model.hpp"
#include "stimosc/dynamics_model.hpp"
#include "stimosc/errors.hpp"
#include "stimosc/lindblad.hpp"
#include "stimosc/units.hpp"

namespace stimosc::config {

struct TwoToneSection {
    int probe_points = 121;
    int pump_points = 13;
    double probe_half_span = 0.0;  // rad/ns, 0 → sized from the expected splitting
    double pump_half_span = 0.0;
    double probe_amplitude = 0.0;  // rad/ns, 0 → 0.02 κ_b
    bool refine = true;
};

struct PumpProbeSection {
    int probe_points = 41;
    int pump_points = 9;
    double probe_half_span = 0.0;
    double pump_half_span = 0.0;
    double probe_duration = 200.0;  // ns
    double probe_rotation = 0.2;    // rad
};

struct G2Section {
    double delta_min = 0.01;
    double delta_max = 0.05;
    int points = 5;
    int probe_points = 121;
    int pump_points = 9;
};

struct CircuitSweepSection {
    double flux_min = -0.5;
    double flux_max = 0.5;
    int points = 101;
};

struct RabiSection {
    int drive_points = 41;
    int amplitude_points = 5;
    double duration = 1000.0;         // ns, chevron gaussian 4σ
    double amplitude_max_pi = 8.0;    // chevron amplitude span in units of the π amplitude
    bool locate_resonances = false;
    double rabi_amplitude_min = units::mhz_to_rad(0.16);
    double rabi_amplitude_max = units::mhz_to_rad(0.8);
    int rabi_points = 5;
    double rabi_duration = 2000.0;
};

struct FwhmSection {
    double amplitude_min = units::mhz_to_rad(0.002);
    double amplitude_max = units::mhz_to_rad(0.5);
    int points = 9;
};

struct WignerSection {
    std::string state = "one";
    double radius = 2.0;
    int points = 21;
    int n_rec = 4;
    bool finite_displacement = true;
    double displacement_duration = 10.0;
    double prep_duration = 100.0;
    std::string readout = "selective";
    bool calibrate_readout = true;
    double n_thermal_prep = 0.06;
    int work_dim = 40;
};

struct CoherenceSection {
    double alpha0 = 3.0;
    double decay_max = 20000.0;  // ns
    int decay_points = 41;
    double t1_max = 20000.0;
    int t1_points = 21;
    double ramsey_max = 6000.0;
    int ramsey_points = 61;
    double fringe = units::mhz_to_rad(1.0);
    double echo_max = 16000.0;
    int echo_points = 17;
    double pulse_duration = 100.0;
    double quasi_static_t_phi = 0.0;  // ns, 0 → no quasi-static noise
    std::string noise_average = "quadrature";
    int quadrature_nodes = 16;
    int realizations = 200;
};

struct RunConfig {
    circuit::CircuitParams device;
    lindblad::NoiseRates noise;
    int n_a = 0;  // 0 → per-experiment default truncation
    int n_b = 0;
    double sqrt2_g2 = units::mhz_to_rad(25.0);
    double delta = 0.0;  // Φ₀; > 0 overrides the coupling target
    lindblad::SolverConfig solver;
    std::uint64_t seed = 1;
    int jobs = 1;
    std::string out_dir = "out";

    CircuitSweepSection circuit_sweep;
    TwoToneSection two_tone;
    PumpProbeSection pump_probe;
    G2Section g2_sweep;
    RabiSection rabi;
    FwhmSection fwhm;
    WignerSection wigner;
    CoherenceSection coherence;

    std::string source;  // path or "<defaults>"
    std::vector<std::string> warnings;

    std::optional<HilbertSpace> space_override() const {
        if (n_a == 0 && n_b == 0) return std::nullopt;
        return HilbertSpace{n_a, n_b};
    }

    // Modulation amplitude: explicit, or solved from the coupling target.
    double resolved_delta() const {
        if (delta > 0.0) return delta;
        return dynamics::delta_for_coupling(device, sqrt2_g2, device.phi_ext);
    }
};

namespace detail {

enum class Kind { real, integer, seed, boolean, choice, text };

struct Field {
    std::string path;
    Kind kind;
    double scale = 1.0;  // config unit → internal unit
    std::function<void*(RunConfig&)> ref;
    std::function<std::string(double)> check;  // returns an error message or ""
    std::vector<std::string> choices;
};

inline std::function<std::string(double)> positive() {
    return [](double v) { return v > 0.0 ? "" : "must be > 0"; };
}
inline std::function<std::string(double)> non_negative() {
    return [](double v) { return v >= 0.0 ? "" : "must be >= 0"; };
}
inline std::function<std::string(double)> at_least(double lo) {
    return [lo](double v) {
        std::ostringstream os;
        if (v < lo) os << "must be >= " << lo;
        return os.str();
    };
}
inline std::function<std::string(double)> within(double lo, double hi) {
    return [lo, hi](double v) {
        std::ostringstream os;
        if (!(v >= lo && v <= hi)) os << "must lie in [" << lo << ", " << hi << "]";
        return os.str();
    };
}
// 0 leaves the per-experiment default in place.
inline std::function<std::string(double)> truncation() {
    return [](double v) { return v == 0.0 || v >= 2.0 ? "" : "must be 0 (default) or >= 2"; };
}
inline std::function<std::string(double)> any() {
    return [](double) { return std::string(); };
}

#define STIMOSC_REF(expr) [](RunConfig& c) -> void* { return &(c.expr); }

inline const std::vector<Field>& schema() {
    using units::khz_to_rad;
    using units::mhz_to_rad;
    static const double khz = khz_to_rad(1.0), mhz = mhz_to_rad(1.0), us = 1e3;
    static const std::vector<Field> fields = {
        {"device.C_a_fF", Kind::real, 1e-15, STIMOSC_REF(device.C_a), positive()},
        {"device.C_b_fF", Kind::real, 1e-15, STIMOSC_REF(device.C_b), positive()},
        {"device.L_a_nH", Kind::real, 1e-9, STIMOSC_REF(device.L_a), positive()},
        {"device.L_b_nH", Kind::real, 1e-9, STIMOSC_REF(device.L_b), positive()},
        {"device.L_J_nH", Kind::real, 1e-9, STIMOSC_REF(device.L_J), positive()},
        {"device.phi_ext_phi0", Kind::real, 1.0, STIMOSC_REF(device.phi_ext), within(-0.5, 0.5)},
        {"device.junction_enabled", Kind::boolean, 1.0, STIMOSC_REF(device.junction_enabled), any()},

        {"noise.kappa_a_kHz", Kind::real, khz, STIMOSC_REF(noise.kappa_a), non_negative()},
        {"noise.kappa_b_MHz", Kind::real, mhz, STIMOSC_REF(noise.kappa_b), non_negative()},
        {"noise.kappa_phi_kHz", Kind::real, khz, STIMOSC_REF(noise.kappa_phi_a), non_negative()},
        {"noise.n_thermal", Kind::real, 1.0, STIMOSC_REF(noise.n_thermal), non_negative()},

        {"space.n_a", Kind::integer, 1.0, STIMOSC_REF(n_a), truncation()},
        {"space.n_b", Kind::integer, 1.0, STIMOSC_REF(n_b), truncation()},

        {"drive.sqrt2_g2_MHz", Kind::real, mhz, STIMOSC_REF(sqrt2_g2), positive()},
        {"drive.delta_phi0", Kind::real, 1.0, STIMOSC_REF(delta), within(0.0, 0.25)},

        {"solver.method", Kind::choice, 1.0, STIMOSC_REF(solver.method), any(), {"lawson-rk4", "fixed-rk4", "adaptive-rk45", "rk4", "rk45"}},
        {"solver.dt_ns", Kind::real, 1.0, STIMOSC_REF(solver.dt), positive()},
        {"solver.step_safety", Kind::real, 1.0, STIMOSC_REF(solver.step_safety), positive()},
        {"solver.rtol", Kind::real, 1.0, STIMOSC_REF(solver.rtol), positive()},
        {"solver.atol", Kind::real, 1.0, STIMOSC_REF(solver.atol), positive()},
        {"solver.max_step_ns", Kind::real, 1.0, STIMOSC_REF(solver.max_step), positive()},

        {"run.seed", Kind::seed, 1.0, STIMOSC_REF(seed), any()},
        {"run.jobs", Kind::integer, 1.0, STIMOSC_REF(jobs), at_least(1)},
        {"run.out_dir", Kind::text, 1.0, STIMOSC_REF(out_dir), any()},

        {"circuit_sweep.flux_min_phi0", Kind::real, 1.0, STIMOSC_REF(circuit_sweep.flux_min), within(-0.5, 0.5)},
        {"circuit_sweep.flux_max_phi0", Kind::real, 1.0, STIMOSC_REF(circuit_sweep.flux_max), within(-0.5, 0.5)},
        {"circuit_sweep.points", Kind::integer, 1.0, STIMOSC_REF(circuit_sweep.points), at_least(2)},

        {"two_tone.probe_points", Kind::integer, 1.0, STIMOSC_REF(two_tone.probe_points), at_least(5)},
        {"two_tone.pump_points", Kind::integer, 1.0, STIMOSC_REF(two_tone.pump_points), at_least(4)},
        {"two_tone.probe_half_span_MHz", Kind::real, mhz, STIMOSC_REF(two_tone.probe_half_span), non_negative()},
        {"two_tone.pump_half_span_MHz", Kind::real, mhz, STIMOSC_REF(two_tone.pump_half_span), non_negative()},
        {"two_tone.probe_amplitude_MHz", Kind::real, mhz, STIMOSC_REF(two_tone.probe_amplitude), non_negative()},
        {"two_tone.refine", Kind::boolean, 1.0, STIMOSC_REF(two_tone.refine), any()},

        {"pump_probe.probe_points", Kind::integer, 1.0, STIMOSC_REF(pump_probe.probe_points), at_least(5)},
        {"pump_probe.pump_points", Kind::integer, 1.0, STIMOSC_REF(pump_probe.pump_points), at_least(4)},
        {"pump_probe.probe_half_span_MHz", Kind::real, mhz, STIMOSC_REF(pump_probe.probe_half_span), non_negative()},
        {"pump_probe.pump_half_span_MHz", Kind::real, mhz, STIMOSC_REF(pump_probe.pump_half_span), non_negative()},
        {"pump_probe.probe_duration_ns", Kind::real, 1.0, STIMOSC_REF(pump_probe.probe_duration), positive()},
        {"pump_probe.probe_rotation_rad", Kind::real, 1.0, STIMOSC_REF(pump_probe.probe_rotation), positive()},

        {"g2_sweep.delta_min_phi0", Kind::real, 1.0, STIMOSC_REF(g2_sweep.delta_min), within(0.0, 0.25)},
        {"g2_sweep.delta_max_phi0", Kind::real, 1.0, STIMOSC_REF(g2_sweep.delta_max), within(0.0, 0.25)},
        {"g2_sweep.points", Kind::integer, 1.0, STIMOSC_REF(g2_sweep.points), at_least(3)},
        {"g2_sweep.probe_points", Kind::integer, 1.0, STIMOSC_REF(g2_sweep.probe_points), at_least(5)},
        {"g2_sweep.pump_points", Kind::integer, 1.0, STIMOSC_REF(g2_sweep.pump_points), at_least(4)},

        {"rabi.drive_points", Kind::integer, 1.0, STIMOSC_REF(rabi.drive_points), at_least(3)},
        {"rabi.amplitude_points", Kind::integer, 1.0, STIMOSC_REF(rabi.amplitude_points), at_least(1)},
        {"rabi.duration_ns", Kind::real, 1.0, STIMOSC_REF(rabi.duration), positive()},
        {"rabi.amplitude_max_pi", Kind::real, 1.0, STIMOSC_REF(rabi.amplitude_max_pi), positive()},
        {"rabi.locate_resonances", Kind::boolean, 1.0, STIMOSC_REF(rabi.locate_resonances), any()},
        {"rabi.rabi_amplitude_min_MHz", Kind::real, mhz, STIMOSC_REF(rabi.rabi_amplitude_min), positive()},
        {"rabi.rabi_amplitude_max_MHz", Kind::real, mhz, STIMOSC_REF(rabi.rabi_amplitude_max), positive()},
        {"rabi.rabi_points", Kind::integer, 1.0, STIMOSC_REF(rabi.rabi_points), at_least(3)},
        {"rabi.rabi_duration_ns", Kind::real, 1.0, STIMOSC_REF(rabi.rabi_duration), positive()},

        {"fwhm.amplitude_min_MHz", Kind::real, mhz, STIMOSC_REF(fwhm.amplitude_min), positive()},
        {"fwhm.amplitude_max_MHz", Kind::real, mhz, STIMOSC_REF(fwhm.amplitude_max), positive()},
        {"fwhm.points", Kind::integer, 1.0, STIMOSC_REF(fwhm.points), at_least(3)},

        {"wigner.state", Kind::choice, 1.0, STIMOSC_REF(wigner.state), any(), {"zero", "one", "plus"}},
        {"wigner.radius", Kind::real, 1.0, STIMOSC_REF(wigner.radius), positive()},
        {"wigner.points", Kind::integer, 1.0, STIMOSC_REF(wigner.points), at_least(4)},
        {"wigner.n_rec", Kind::integer, 1.0, STIMOSC_REF(wigner.n_rec), at_least(2)},
        {"wigner.finite_displacement", Kind::boolean, 1.0, STIMOSC_REF(wigner.finite_displacement), any()},
        {"wigner.displacement_duration_ns", Kind::real, 1.0, STIMOSC_REF(wigner.displacement_duration), positive()},
        {"wigner.prep_duration_ns", Kind::real, 1.0, STIMOSC_REF(wigner.prep_duration), positive()},
        {"wigner.readout", Kind::choice, 1.0, STIMOSC_REF(wigner.readout), any(), {"ideal", "selective"}},
        {"wigner.calibrate_readout", Kind::boolean, 1.0, STIMOSC_REF(wigner.calibrate_readout), any()},
        {"wigner.n_thermal_prep", Kind::real, 1.0, STIMOSC_REF(wigner.n_thermal_prep), non_negative()},
        {"wigner.work_dim", Kind::integer, 1.0, STIMOSC_REF(wigner.work_dim), at_least(8)},

        {"coherence.alpha0", Kind::real, 1.0, STIMOSC_REF(coherence.alpha0), positive()},
        {"coherence.decay_max_us", Kind::real, us, STIMOSC_REF(coherence.decay_max), positive()},
        {"coherence.decay_points", Kind::integer, 1.0, STIMOSC_REF(coherence.decay_points), at_least(4)},
        {"coherence.t1_max_us", Kind::real, us, STIMOSC_REF(coherence.t1_max), positive()},
        {"coherence.t1_points", Kind::integer, 1.0, STIMOSC_REF(coherence.t1_points), at_least(4)},
        {"coherence.ramsey_max_us", Kind::real, us, STIMOSC_REF(coherence.ramsey_max), positive()},
        {"coherence.ramsey_points", Kind::integer, 1.0, STIMOSC_REF(coherence.ramsey_points), at_least(6)},
        {"coherence.fringe_MHz", Kind::real, mhz, STIMOSC_REF(coherence.fringe), positive()},
        {"coherence.echo_max_us", Kind::real, us, STIMOSC_REF(coherence.echo_max), positive()},
        {"coherence.echo_points", Kind::integer, 1.0, STIMOSC_REF(coherence.echo_points), at_least(3)},
        {"coherence.pulse_duration_ns", Kind::real, 1.0, STIMOSC_REF(coherence.pulse_duration), positive()},
        {"coherence.quasi_static_T_phi_us", Kind::real, us, STIMOSC_REF(coherence.quasi_static_t_phi), non_negative()},
        {"coherence.noise_average", Kind::choice, 1.0, STIMOSC_REF(coherence.noise_average), any(),
         {"quadrature", "monte_carlo"}},
        {"coherence.quadrature_nodes", Kind::integer, 1.0, STIMOSC_REF(coherence.quadrature_nodes), at_least(1)},
        {"coherence.realizations", Kind::integer, 1.0, STIMOSC_REF(coherence.realizations), at_least(1)},
    };
    return fields;
}

#undef STIMOSC_REF

inline const Field* find(const std::string& path) {
    for (const auto& f : schema())
        if (f.path == path) return &f;
    return nullptr;
}

inline int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : -1; }

inline void assign(RunConfig& cfg, const Field& f, const YAML::Node& value, int line) {
    if (!value.IsScalar()) throw ConfigError(f.path, line, f.path + ": expected a scalar value");
    void* target = f.ref(cfg);
    const std::string text = value.Scalar();
    auto fail = [&](const std::string& msg) { throw ConfigError(f.path, line, f.path + ": " + msg); };
    try {
        switch (f.kind) {
            case Kind::real: {
                const double v = value.as<double>();
                if (!std::isfinite(v)) fail("must be finite");
                if (auto m = f.check(v); !m.empty()) fail(m);
                *static_cast<double*>(target) = v * f.scale;
                break;
            }
            case Kind::integer: {
                const double v = value.as<double>();
                if (v != std::floor(v) || std::abs(v) > 1e9) fail("expected an integer");
                if (auto m = f.check(v); !m.empty()) fail(m);
                *static_cast<int*>(target) = static_cast<int>(v);
                break;
            }
            case Kind::seed: *static_cast<std::uint64_t*>(target) = value.as<std::uint64_t>(); break;
            case Kind::boolean: *static_cast<bool*>(target) = value.as<bool>(); break;
            case Kind::text: *static_cast<std::string*>(target) = text; break;
            case Kind::choice: {
                if (std::find(f.choices.begin(), f.choices.end(), text) == f.choices.end()) {
                    std::string all;
                    for (const auto& c : f.choices) all += (all.empty() ? "" : ", ") + c;
                    fail("'" + text + "' is not one of {" + all + "}");
                }
                if (f.path == "solver.method") {
                    cfg.solver.method = lindblad::method_from_string(text);
                } else {
                    *static_cast<std::string*>(target) = text;
                }
                break;
            }
        }
    } catch (const YAML::BadConversion&) {
        fail("cannot convert '" + text + "'");
    }
}

inline nlohmann::ordered_json value_of(const RunConfig& cfg, const Field& f) {
    void* p = f.ref(const_cast<RunConfig&>(cfg));
    switch (f.kind) {
        case Kind::real: {
            std::ostringstream os;
            os << std::setprecision(12) << *static_cast<const double*>(p) / f.scale;
            return std::stod(os.str());
        }
        case Kind::integer: return *static_cast<const int*>(p);
        case Kind::seed: return *static_cast<const std::uint64_t*>(p);
        case Kind::boolean: return *static_cast<const bool*>(p);
        case Kind::text: return *static_cast<const std::string*>(p);
        case Kind::choice:
            if (f.path == "solver.method") return lindblad::to_string(cfg.solver.method);
            return *static_cast<const std::string*>(p);
    }
    return nullptr;
}

}  // namespace detail

// Cross-field checks after all keys are applied.
inline void validate(const RunConfig& cfg) {
    auto wrap = [](const std::string& key, auto&& fn) {
        try {
            fn();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(key, -1, key + ": " + e.what());
        }
    };
    wrap("device", [&] { cfg.device.validate(); });
    wrap("noise", [&] { cfg.noise.validate(); });
    wrap("solver", [&] { cfg.solver.validate(); });
    if ((cfg.n_a == 0) != (cfg.n_b == 0)) throw ConfigError("space", -1, "space: set both n_a and n_b or neither");
    auto ordered = [](const std::string& key, double lo, double hi) {
        if (!(hi > lo)) throw ConfigError(key, -1, key + ": maximum must exceed minimum");
    };
    ordered("circuit_sweep", cfg.circuit_sweep.flux_min, cfg.circuit_sweep.flux_max);
    ordered("g2_sweep", cfg.g2_sweep.delta_min, cfg.g2_sweep.delta_max);
    ordered("rabi", cfg.rabi.rabi_amplitude_min, cfg.rabi.rabi_amplitude_max);
    ordered("fwhm", cfg.fwhm.amplitude_min, cfg.fwhm.amplitude_max);
    if (cfg.g2_sweep.delta_min <= 0.0) throw ConfigError("g2_sweep.delta_min_phi0", -1, "g2_sweep.delta_min_phi0: must be > 0");
    if (cfg.wigner.work_dim < 2 * cfg.wigner.n_rec) {
        throw ConfigError("wigner.work_dim", -1, "wigner.work_dim: must be at least twice n_rec");
    }
}

// Canonical, order-stable dump of every schema key in config units.
inline nlohmann::ordered_json resolved(const RunConfig& cfg) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& f : detail::schema()) {
        const auto dot = f.path.find('.');
        j[f.path.substr(0, dot)][f.path.substr(dot + 1)] = detail::value_of(cfg, f);
    }
    return j;
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Hash of the physics-relevant configuration; run.* keys (jobs, output
// directory) do not change results and are excluded.
inline std::string content_hash(const RunConfig& cfg) {
    auto j = resolved(cfg);
    j.erase("run");
    j["run"]["seed"] = cfg.seed;
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(j.dump());
    return os.str();
}

inline void apply_node(RunConfig& cfg, const YAML::Node& root) {
    if (!root || root.IsNull()) return;
    if (!root.IsMap()) throw ConfigError("", detail::line_of(root), "configuration root must be a mapping");
    for (const auto& section : root) {
        const auto name = section.first.as<std::string>();
        const int line = detail::line_of(section.first);
        if (!section.second.IsMap()) {
            if (section.second.IsNull()) continue;
            throw ConfigError(name, line, name + ": expected a section of key: value pairs");
        }
        bool known_section = false;
        for (const auto& f : detail::schema())
            if (f.path.rfind(name + ".", 0) == 0) known_section = true;
        if (!known_section) throw ConfigError(name, line, "unknown section '" + name + "'");
        for (const auto& kv : section.second) {
            const auto key = name + "." + kv.first.as<std::string>();
            const auto* f = detail::find(key);
            if (!f) throw ConfigError(key, detail::line_of(kv.first), "unknown key '" + key + "'");
            detail::assign(cfg, *f, kv.second, detail::line_of(kv.second));
        }
    }
}

inline RunConfig parse_config(const std::string& text, const std::string& source = "<string>") {
    RunConfig cfg;
    cfg.source = source;
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError("", e.mark.line + 1, source + ": parse error: " + e.msg);
    }
    apply_node(cfg, root);
    validate(cfg);
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", -1, "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

inline RunConfig defaults() {
    RunConfig cfg;
    cfg.source = "<defaults>";
    return cfg;
}

// `section.key=value` override; the value is parsed as a YAML scalar. Field
// checks run here, cross-field checks are left to validate().
inline void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError(assignment, -1, "override '" + assignment + "' is not of the form section.key=value");
    }
    const auto key = assignment.substr(0, eq);
    const auto* f = detail::find(key);
    if (!f) throw ConfigError(key, -1, "unknown key '" + key + "'");
    YAML::Node v;
    try {
        v = YAML::Load(assignment.substr(eq + 1));
    } catch (const YAML::ParserException&) {
        throw ConfigError(key, -1, key + ": cannot parse override value");
    }
    if (!v.IsDefined() || v.IsNull()) throw ConfigError(key, -1, key + ": empty override value");
    detail::assign(cfg, *f, v, -1);
}

// Schema as documentation rows: key, unit suffix meaning, default.
inline std::string schema_table() {
    const auto d = resolved(defaults());
    std::ostringstream os;
    for (const auto& f : detail::schema()) {
        const auto dot = f.path.find('.');
        os << f.path << " = " << d[f.path.substr(0, dot)][f.path.substr(dot + 1)].dump();
        if (!f.choices.empty()) {
            os << "  {";
            for (std::size_t i = 0; i < f.choices.size(); ++i) os << (i ? "|" : "") << f.choices[i];
            os << "}";
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace stimosc::config
