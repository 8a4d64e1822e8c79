#pragma once

// Subcommand orchestration: build experiment inputs from a RunConfig, run,
// and persist results under <out>/<subcommand>-<hash>/ with a manifest and a
// gnuplot script.

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "stimosc/circuit_model.hpp"
#include "stimosc/config.hpp"
#include "stimosc/errors.hpp"
#include "stimosc/experiments.hpp"
#include "stimosc/selftest.hpp"
#include "stimosc/tomography.hpp"

#ifndef STIMOSC_VERSION
#define STIMOSC_VERSION "unknown"
#endif

namespace stimosc::runner {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using config::RunConfig;

inline constexpr int exit_ok = 0;
inline constexpr int exit_failure = 1;  // selftest reported a failed check
inline constexpr int exit_config = 2;
inline constexpr int exit_numerical = 3;

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> s = {"circuit-sweep", "two-tone", "pump-probe", "g2-sweep", "rabi",
                                               "fwhm",          "wigner",   "coherence",  "selftest"};
    return s;
}

// Results of one subcommand before they touch the disk.
struct Artifacts {
    std::vector<experiments::ExperimentResult> results;
    std::map<std::string, json> extra_json;  // file name → document
    std::map<std::string, std::string> extra_text;
    json truncation = json::object();
    json summary = json::object();
    int exit_code = exit_ok;
};

struct Outcome {
    int exit_code = exit_ok;
    fs::path directory;
    json manifest;
};

// ---- helpers ------------------------------------------------------------

inline experiments::Common make_common(const RunConfig& cfg) {
    experiments::Common c;
    c.delta = cfg.resolved_delta();
    c.model = dynamics::SystemModel::from_circuit(cfg.device, c.delta, cfg.device.phi_ext);
    c.rates = cfg.noise;
    c.solver = cfg.solver;
    c.jobs = static_cast<unsigned>(cfg.jobs);
    c.seed = cfg.seed;
    return c;
}

inline HilbertSpace space_for(const RunConfig& cfg, HilbertSpace fallback) { return cfg.space_override().value_or(fallback); }

inline json describe_space(HilbertSpace s) { return {{"n_a", s.n_a}, {"n_b", s.n_b}}; }

inline std::vector<double> centred(double centre, double half, int n) { return experiments::linspace(centre - half, centre + half, n); }

inline std::string csv_name(const experiments::ExperimentResult& r, const experiments::Table& t) {
    return r.name + "_" + t.name + ".csv";
}

// Generic plot script: heat maps for two-axis tables, line plots otherwise.
inline std::string gnuplot_script(const std::vector<experiments::ExperimentResult>& results) {
    std::ostringstream gp;
    gp << "set datafile separator ','\n"
       << "set key autotitle columnhead\n"
       << "set terminal pngcairo size 900,650\n";
    for (const auto& r : results) {
        for (const auto& t : r.tables) {
            const std::string file = csv_name(r, t);
            const std::string stem = file.substr(0, file.size() - 4);
            gp << "\n# " << stem << '\n' << "set output '" << stem << ".png'\n";
            const auto label = [](const experiments::Axis& a) { return a.name + (a.unit.empty() ? "" : " (" + a.unit + ")"); };
            if (t.axes.size() == 2) {
                const std::size_t nc = t.columns.size();
                gp << "set xlabel '" << label(t.axes[1]) << "'\nset ylabel '" << label(t.axes[0]) << "'\n"
                   << "set view map\n"
                   << "splot '" << file << "' using 2:1:3 with image title '" << (nc ? t.columns[0] : "") << "'\n"
                   << "unset view\n";
            } else {
                gp << "set xlabel '" << label(t.axes[0]) << "'\nunset ylabel\nplot";
                for (std::size_t c = 0; c < t.columns.size(); ++c)
                    gp << (c ? "," : "") << " '" << file << "' using 1:" << c + 2 << " with linespoints";
                gp << '\n';
            }
        }
    }
    return gp.str();
}

inline void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
    out << content;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---- subcommands ----------------------------------------------------------------

inline Artifacts run_circuit_sweep(const RunConfig& cfg) {
    const auto& s = cfg.circuit_sweep;
    const auto grid = circuit::uniform_grid(s.flux_min, s.flux_max, static_cast<std::size_t>(s.points));
    const auto sweep = circuit::flux_sweep(cfg.device, grid, static_cast<unsigned>(cfg.jobs));
    experiments::ExperimentResult r;
    r.name = "circuit";
    experiments::Table t{"sweep", {{"flux", "phi0", grid}}, {}, {}};
    std::vector<double> wa, wb, g2, caa, cbb, cab;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& c = sweep.coefficients[i];
        wa.push_back(units::rad_to_ghz(c.omega_a));
        wb.push_back(units::rad_to_ghz(c.omega_b));
        g2.push_back(units::rad_to_mhz(c.g2));
        caa.push_back(units::rad_to_mhz(c.chi_aa));
        cbb.push_back(units::rad_to_mhz(c.chi_bb));
        cab.push_back(units::rad_to_mhz(c.chi_ab));
    }
    t.add("omega_a_GHz", wa);
    t.add("omega_b_GHz", wb);
    t.add("g2_MHz", g2);
    t.add("chi_aa_MHz", caa);
    t.add("chi_bb_MHz", cbb);
    t.add("chi_ab_MHz", cab);
    r.tables = {t};
    const auto c0 = circuit::normal_modes(cfg.device.at_flux(0.0));
    r.summary["omega_a_GHz_at_zero_flux"] = units::rad_to_ghz(c0.omega_a);
    r.summary["omega_b_GHz_at_zero_flux"] = units::rad_to_ghz(c0.omega_b);
    r.summary["chi_aa_MHz"] = units::rad_to_mhz(c0.chi_aa);
    r.summary["chi_bb_MHz"] = units::rad_to_mhz(c0.chi_bb);
    r.summary["chi_ab_MHz"] = units::rad_to_mhz(c0.chi_ab);
    r.summary["chi_ab_sq_over_4_chi_aa_chi_bb"] = c0.chi_ab * c0.chi_ab / (4.0 * c0.chi_aa * c0.chi_bb);
    r.summary["dg2_dflux_MHz_per_phi0_at_zero"] = units::rad_to_mhz(circuit::dg2_dflux(cfg.device, 0.0));
    r.metadata["junction_enabled"] = cfg.device.junction_enabled;
    r.validate();
    Artifacts a;
    a.results = {r};
    a.truncation = "none (classical normal-mode model)";
    return a;
}

inline experiments::TwoToneOptions two_tone_options(const RunConfig& cfg) {
    experiments::TwoToneOptions o;
    o.space = space_for(cfg, o.space);
    if (cfg.two_tone.probe_amplitude > 0.0) o.probe_amplitude = cfg.two_tone.probe_amplitude;
    o.refine = cfg.two_tone.refine;
    return o;
}

inline Artifacts run_two_tone(const RunConfig& cfg) {
    const auto c = make_common(cfg);
    const auto& s = cfg.two_tone;
    const auto opt = two_tone_options(cfg);
    auto probe = experiments::default_two_tone_probe(c.model, s.probe_points);
    if (s.probe_half_span > 0.0) probe = centred(c.model.omega_b_on(), s.probe_half_span, s.probe_points);
    auto pump = experiments::default_pump_grid(c.model, s.pump_points);
    if (s.pump_half_span > 0.0) pump = centred(c.model.optimal_pump(), s.pump_half_span, s.pump_points);
    Artifacts a;
    a.results = {experiments::two_tone_spectroscopy(c, probe, pump, opt)};
    a.truncation["two_tone"] = describe_space(opt.space);
    return a;
}

inline Artifacts run_pump_probe(const RunConfig& cfg) {
    const auto c = make_common(cfg);
    const auto& s = cfg.pump_probe;
    experiments::PumpProbeOptions opt;
    opt.space = space_for(cfg, opt.space);
    opt.probe_duration = s.probe_duration;
    opt.probe_rotation = s.probe_rotation;
    auto probe = experiments::default_pump_probe_probe(c.model, s.probe_points);
    if (s.probe_half_span > 0.0) probe = centred(c.model.omega_a_on() + c.model.chi_aa, s.probe_half_span, s.probe_points);
    auto pump = experiments::default_pump_grid(c.model, s.pump_points);
    if (s.pump_half_span > 0.0) pump = centred(c.model.optimal_pump(), s.pump_half_span, s.pump_points);
    Artifacts a;
    a.results = {experiments::pump_probe_spectroscopy(c, probe, pump, opt)};
    a.truncation["pump_probe"] = describe_space(opt.space);
    return a;
}

inline Artifacts run_g2_sweep(const RunConfig& cfg) {
    const auto c = make_common(cfg);
    const auto& s = cfg.g2_sweep;
    experiments::G2SweepOptions opt;
    opt.two_tone = two_tone_options(cfg);
    opt.probe_points = s.probe_points;
    opt.pump_points = s.pump_points;
    Artifacts a;
    a.results = {experiments::g2_vs_amplitude(cfg.device, c, experiments::linspace(s.delta_min, s.delta_max, s.points), opt)};
    a.truncation["g2_sweep"] = describe_space(opt.two_tone.space);
    return a;
}

inline Artifacts run_rabi(const RunConfig& cfg) {
    const auto c = make_common(cfg);
    const auto& s = cfg.rabi;
    experiments::ChevronOptions chev;
    chev.space = space_for(cfg, chev.space);
    chev.duration = s.duration;
    const double pi_amp = pulses::ideal_pi_amplitude(pulses::Envelope::gaussian(0.0, chev.duration));
    const auto freqs = experiments::default_chevron_frequencies(c.model, s.drive_points);
    const auto amps = s.amplitude_points == 1 ? std::vector<double>{pi_amp}
                                              : experiments::linspace(pi_amp, s.amplitude_max_pi * pi_amp, s.amplitude_points);
    auto chevron = experiments::rabi_chevron(c, freqs, amps, chev);
    if (s.locate_resonances) {
        const experiments::ChevronSimulator sim(c, chev);
        const double half = std::max(units::mhz_to_rad(2.0), 0.15 * std::sqrt(2.0) * std::abs(c.model.g2_tilde));
        const auto res = experiments::locate_chevron_resonances(sim, c, chev, amps.back(), freqs, half);
        auto ghz = [](double w) { return units::rad_to_ghz(w); };
        auto mhz = [](double w) { return units::rad_to_mhz(w); };
        chevron.summary["resonances"] = {
            {"single_GHz", ghz(res.single.center)},        {"single_fwhm_MHz", mhz(res.single.fwhm)},
            {"two_minus_GHz", ghz(res.two_minus.center)},  {"two_minus_fwhm_MHz", mhz(res.two_minus.fwhm)},
            {"two_plus_GHz", ghz(res.two_plus.center)},    {"two_plus_fwhm_MHz", mhz(res.two_plus.fwhm)},
            {"oracle_01_GHz", ghz(res.oracle_01)},         {"oracle_02_minus_half_GHz", ghz(res.oracle_02_minus_half)},
            {"oracle_02_plus_half_GHz", ghz(res.oracle_02_plus_half)}};
    }
    experiments::RabiOptions ro;
    ro.space = space_for(cfg, ro.space);
    ro.duration = s.rabi_duration;
    auto slope = experiments::rabi_frequency_vs_amplitude(
        c, experiments::linspace(s.rabi_amplitude_min, s.rabi_amplitude_max, s.rabi_points), ro);
    Artifacts a;
    a.results = {std::move(chevron), std::move(slope)};
    a.truncation["rabi_chevron"] = describe_space(chev.space);
    a.truncation["rabi_slope"] = describe_space(ro.space);
    return a;
}

inline Artifacts run_fwhm(const RunConfig& cfg) {
    const auto c = make_common(cfg);
    experiments::FwhmOptions opt;
    opt.space = space_for(cfg, opt.space);
    std::vector<double> amps(static_cast<std::size_t>(cfg.fwhm.points));
    const double lo = std::log(cfg.fwhm.amplitude_min), hi = std::log(cfg.fwhm.amplitude_max);
    for (std::size_t i = 0; i < amps.size(); ++i) amps[i] = std::exp(lo + (hi - lo) * i / (amps.size() - 1));
    Artifacts a;
    a.results = {experiments::fwhm_vs_amplitude(c, amps, opt)};
    a.truncation["fwhm"] = describe_space(opt.space);
    return a;
}

inline Artifacts run_wigner(const RunConfig& cfg) {
    const auto c = make_common(cfg);
    const auto& s = cfg.wigner;
    tomography::ProtocolConfig p;
    p.model = c.model;
    p.rates = c.rates;
    p.rates.n_thermal = s.n_thermal_prep;
    p.space = space_for(cfg, p.space);
    p.prep_duration = s.prep_duration;
    p.finite_displacement = s.finite_displacement;
    p.displacement_duration = s.displacement_duration;
    p.readout = s.readout == "ideal" ? tomography::ReadoutModel::exact()
                                     : tomography::ReadoutModel::selective(c.model.chi_ab, c.rates.kappa_a, c.rates.kappa_b);
    p.calibrate_readout = s.calibrate_readout;
    p.n_rec = s.n_rec;
    p.work_dim = s.work_dim;
    p.solver = c.solver;
    const auto target = tomography::target_from_string(s.state);
    const auto grid = tomography::WignerGrid::square(s.radius, s.points);
    const auto res = tomography::full_protocol(target, p, grid, c.jobs);

    experiments::ExperimentResult r;
    r.name = "wigner_" + s.state;
    experiments::Table t{"map", {{"im", "alpha", grid.im}, {"re", "alpha", grid.re}}, {}, {}};
    t.add("W", res.map.values);
    r.tables = {t};
    r.health = res.preparation.health;
    r.metadata = experiments::base_metadata(c, p.space);
    r.metadata["target"] = s.state;
    r.metadata["finite_displacement"] = s.finite_displacement;
    r.metadata["readout"] = s.readout;
    r.metadata["n_thermal_prep"] = s.n_thermal_prep;
    r.summary["fidelity"] = res.state.fidelity;
    r.summary["pi_amplitude_MHz"] = units::rad_to_mhz(res.preparation.pi_amplitude);
    r.summary["wigner_integral"] = res.map.integral(s.radius);
    r.summary["wigner_min"] = *std::min_element(res.map.values.begin(), res.map.values.end());
    r.summary["clipped_weight"] = res.state.clipped_weight;
    r.summary["state_file"] = r.name + "_state.json";
    if (res.calibration) r.summary["readout_calibration_norms"] = res.calibration->norms;
    r.validate();

    Artifacts a;
    auto state = res.state.to_json();
    state["target"] = s.state;
    a.extra_json[r.name + "_state.json"] = state;
    a.summary["fidelity"] = res.state.fidelity;
    a.results = {std::move(r)};
    a.truncation["preparation"] = describe_space(p.space);
    a.truncation["work_dim"] = p.work_dim;
    a.truncation["n_rec"] = p.n_rec;
    if (p.finite_displacement) a.truncation["displacement_levels"] = p.displacement_levels;
    return a;
}

inline Artifacts run_coherence(const RunConfig& cfg) {
    const auto c = make_common(cfg);
    const auto& s = cfg.coherence;
    experiments::CoherenceOptions opt;
    opt.space = space_for(cfg, opt.space);
    opt.pulse_duration = s.pulse_duration;
    if (s.quasi_static_t_phi > 0.0) opt.quasi_static_sigma = experiments::quasi_static_sigma_for(s.quasi_static_t_phi);
    opt.average = s.noise_average == "monte_carlo" ? experiments::NoiseAverage::monte_carlo : experiments::NoiseAverage::quadrature;
    opt.quadrature_nodes = s.quadrature_nodes;
    opt.realizations = s.realizations;
    const HilbertSpace decay_space = cfg.space_override() ? *cfg.space_override() : HilbertSpace{40, 2};
    Artifacts a;
    a.results.push_back(experiments::coherent_state_decay(c, s.alpha0, experiments::linspace(0.0, s.decay_max, s.decay_points),
                                                          decay_space));
    a.results.push_back(experiments::t1_experiment(c, experiments::linspace(0.0, s.t1_max, s.t1_points), opt));
    a.results.push_back(
        experiments::ramsey_experiment(c, experiments::linspace(0.0, s.ramsey_max, s.ramsey_points), s.fringe, opt));
    a.results.push_back(experiments::echo_experiment(c, experiments::linspace(0.0, s.echo_max, s.echo_points), opt));
    a.truncation["coherent_decay"] = describe_space(decay_space);
    a.truncation["qubit_experiments"] = describe_space(opt.space);
    return a;
}

inline Artifacts run_selftest(const RunConfig&) {
    const auto checks = selftest::run_all();
    Artifacts a;
    const auto report = selftest::report(checks);
    a.extra_json["selftest.json"] = report;
    a.summary["passed"] = report["passed"];
    int failed = 0;
    for (const auto& c : checks) failed += c.passed ? 0 : 1;
    a.summary["failed_checks"] = failed;
    a.summary["checks"] = static_cast<int>(checks.size());
    a.exit_code = failed ? exit_failure : exit_ok;
    return a;
}

inline Artifacts dispatch(const std::string& sub, const RunConfig& cfg) {
    if (sub == "circuit-sweep") return run_circuit_sweep(cfg);
    if (sub == "two-tone") return run_two_tone(cfg);
    if (sub == "pump-probe") return run_pump_probe(cfg);
    if (sub == "g2-sweep") return run_g2_sweep(cfg);
    if (sub == "rabi") return run_rabi(cfg);
    if (sub == "fwhm") return run_fwhm(cfg);
    if (sub == "wigner") return run_wigner(cfg);
    if (sub == "coherence") return run_coherence(cfg);
    if (sub == "selftest") return run_selftest(cfg);
    throw ConfigError("subcommand", -1, "unknown subcommand '" + sub + "'");
}

// ---- persistence --------------------------------------------------------------------

inline fs::path artifact_dir(const std::string& sub, const RunConfig& cfg) {
    return fs::path(cfg.out_dir) / (sub + "-" + config::content_hash(cfg));
}

inline Outcome run(const std::string& sub, const RunConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    Artifacts a;
    std::vector<std::string> warnings = cfg.warnings;
    {
        WarningCollector collect;
        a = dispatch(sub, cfg);
        warnings.insert(warnings.end(), collect.messages().begin(), collect.messages().end());
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    Outcome out;
    out.directory = artifact_dir(sub, cfg);
    fs::create_directories(out.directory);
    std::vector<std::string> files;
    auto put = [&](const std::string& name, const std::string& content) {
        write_file(out.directory / name, content);
        files.push_back(name);
    };
    json summaries = json::object();
    for (const auto& r : a.results) {
        for (const auto& t : r.tables) {
            std::ostringstream os;
            t.write_csv(os);
            put(csv_name(r, t), os.str());
        }
        put(r.name + ".json", dump(r.to_json()));
        summaries[r.name] = r.summary;
        for (const auto& w : r.warnings) warnings.push_back(r.name + ": " + w);
    }
    for (const auto& [name, doc] : a.extra_json) put(name, dump(doc));
    for (const auto& [name, text] : a.extra_text) put(name, text);
    if (!a.results.empty()) put(sub + ".gp", gnuplot_script(a.results));

    json m;
    m["subcommand"] = sub;
    m["config_hash"] = config::content_hash(cfg);
    m["code_version"] = STIMOSC_VERSION;
    m["config_source"] = cfg.source;
    m["seed"] = cfg.seed;
    m["jobs"] = cfg.jobs;
    m["wall_time_s"] = wall;
    m["truncation"] = a.truncation;
    m["summary"] = a.summary.empty() ? summaries : a.summary;
    if (!a.summary.empty() && !summaries.empty()) m["results"] = summaries;
    m["files"] = files;
    m["warnings"] = warnings;
    m["config"] = config::resolved(cfg);
    m["exit_code"] = a.exit_code;
    write_file(out.directory / "manifest.json", dump(m));
    out.manifest = m;
    out.exit_code = a.exit_code;
    return out;
}

// One-line machine-parseable error record.
inline std::string error_record(const std::string& kind, int code, const std::string& message, const std::string& key = {},
                                int line = -1) {
    json e;
    e["error"] = kind;
    e["exit_code"] = code;
    if (!key.empty()) e["key"] = key;
    if (line > 0) e["line"] = line;
    e["message"] = message;
    return e.dump();
}

}  // namespace stimosc::runner
