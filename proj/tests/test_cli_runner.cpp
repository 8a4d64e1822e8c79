#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stimosc/config.hpp"
#include "stimosc/runner.hpp"

using namespace stimosc;
namespace fs = std::filesystem;
using Catch::Approx;

namespace {

const std::string cli = STIMOSC_CLI_PATH;
const std::string canonical = std::string(STIMOSC_SOURCE_DIR) + "/configs/canonical.yaml";

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("stimosc_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run invoke(const std::string& args, const fs::path& dir) {
    const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = cli + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path only_dir(const fs::path& root, const std::string& prefix) {
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory() && e.path().filename().string().rfind(prefix, 0) == 0) return e.path();
    FAIL("no artifact directory with prefix " << prefix);
    return {};
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

template <class F>
ConfigError config_error(F&& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        return e;
    }
    FAIL("expected a ConfigError");
    return ConfigError("");
}

}  // namespace

TEST_CASE("canonical config loads cleanly and matches the built-in defaults") {
    WarningCollector warnings;
    const auto cfg = config::load_config(canonical);
    CHECK(cfg.warnings.empty());
    CHECK(warnings.messages().empty());
    CHECK(config::content_hash(cfg) == config::content_hash(config::defaults()));
    CHECK(cfg.device.C_a == Approx(450e-15));
    CHECK(cfg.noise.kappa_a == Approx(units::khz_to_rad(35.2)));
}

TEST_CASE("negative capacitance is a schema error naming the key and line") {
    const auto e = config_error([] { config::parse_config("device:\n  C_b_fF: 244.3\n  C_a_fF: -450\n"); });
    CHECK(e.key() == "device.C_a_fF");
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("device.C_a_fF") != std::string::npos);
}

TEST_CASE("unknown sections, unknown keys and bad types are rejected with their location") {
    auto e = config_error([] { config::parse_config("noise:\n  kappa_a_kHz: 30\n  kappa_x: 1\n"); });
    CHECK(e.key() == "noise.kappa_x");
    CHECK(e.line() == 3);
    e = config_error([] { config::parse_config("\nnoize:\n  kappa_a_kHz: 30\n"); });
    CHECK(e.key() == "noize");
    CHECK(e.line() == 2);
    e = config_error([] { config::parse_config("space:\n  n_a: 2.5\n  n_b: 2\n"); });
    CHECK(e.key() == "space.n_a");
    e = config_error([] { config::parse_config("solver:\n  method: euler\n"); });
    CHECK(e.key() == "solver.method");
    e = config_error([] { config::parse_config("noise:\n  kappa_b_MHz: fast\n"); });
    CHECK(e.key() == "noise.kappa_b_MHz");
    e = config_error([] { config::parse_config("space:\n  n_a: 6\n"); });
    CHECK(e.key() == "space");
    e = config_error([] { config::parse_config("circuit_sweep:\n  flux_min_phi0: 0.2\n  flux_max_phi0: 0.1\n"); });
    CHECK(e.key() == "circuit_sweep");
    e = config_error([] { config::parse_config("device: [1, 2\n"); });
    CHECK(e.line() >= 1);
}

TEST_CASE("missing noise section falls back to the default rates") {
    const auto cfg = config::parse_config("device:\n  C_a_fF: 450.0\n");
    CHECK(cfg.noise.kappa_a == Approx(units::khz_to_rad(35.2)).epsilon(1e-12));
    CHECK(cfg.noise.kappa_b == Approx(units::mhz_to_rad(0.5)).epsilon(1e-12));
    CHECK(cfg.noise.kappa_phi_a == 0.0);
    const auto empty = config::parse_config("");
    CHECK(config::content_hash(empty) == config::content_hash(config::defaults()));
}

TEST_CASE("JSON is accepted as an input encoding") {
    const auto cfg = config::parse_config(R"({"noise": {"kappa_a_kHz": 40}, "space": {"n_a": 5, "n_b": 2}})");
    CHECK(cfg.noise.kappa_a == Approx(units::khz_to_rad(40.0)));
    REQUIRE(cfg.space_override());
    CHECK(cfg.space_override()->n_a == 5);
}

TEST_CASE("overrides edit single keys and the hash tracks physics keys only") {
    auto cfg = config::defaults();
    const auto h0 = config::content_hash(cfg);
    CHECK(h0.size() == 16);
    config::apply_override(cfg, "run.jobs=4");
    config::apply_override(cfg, "run.out_dir=elsewhere");
    CHECK(config::content_hash(cfg) == h0);
    config::apply_override(cfg, "noise.kappa_a_kHz=40");
    CHECK(cfg.noise.kappa_a == Approx(units::khz_to_rad(40.0)));
    const auto h1 = config::content_hash(cfg);
    CHECK(h1 != h0);
    config::apply_override(cfg, "noise.kappa_a_kHz=35.2");
    CHECK(config::content_hash(cfg) == h0);
    config::apply_override(cfg, "run.seed=7");
    CHECK(config::content_hash(cfg) != h0);
    config::apply_override(cfg, "solver.method=rk45");
    CHECK(cfg.solver.method == lindblad::Method::rk45);
    CHECK(config::resolved(cfg)["solver"]["method"] == "adaptive-rk45");

    CHECK(config_error([&] { config::apply_override(cfg, "noise.kappa_q=1"); }).key() == "noise.kappa_q");
    CHECK(config_error([&] { config::apply_override(cfg, "device.C_a_fF=-1"); }).key() == "device.C_a_fF");
    CHECK(config_error([&] { config::apply_override(cfg, "no_equals_sign"); }).key() == "no_equals_sign");
}

TEST_CASE("resolved config round-trips through the parser") {
    auto cfg = config::defaults();
    config::apply_override(cfg, "drive.sqrt2_g2_MHz=20");
    config::apply_override(cfg, "wigner.state=plus");
    const auto again = config::parse_config(config::resolved(cfg).dump());
    CHECK(config::content_hash(again) == config::content_hash(cfg));
}

TEST_CASE("every schema key appears in the canonical file or the schema document") {
    const auto yaml = slurp(canonical);
    const auto doc = slurp(std::string(STIMOSC_SOURCE_DIR) + "/configs/SCHEMA.md");
    for (const auto& f : config::detail::schema()) {
        const auto key = f.path.substr(f.path.find('.') + 1);
        INFO(f.path);
        CHECK(doc.find(key) != std::string::npos);
    }
    CHECK(yaml.find("kappa_a_kHz: 35.2") != std::string::npos);
}

TEST_CASE("circuit-sweep writes the documented header, deterministically") {
    const auto root = scratch("sweep");
    REQUIRE(invoke("circuit-sweep --config " + canonical + " --out " + (root / "a").string(), root).code == 0);
    REQUIRE(invoke("circuit-sweep --config " + canonical + " --jobs 3 --out " + (root / "b").string(), root).code == 0);
    const auto da = only_dir(root / "a", "circuit-sweep-"), db = only_dir(root / "b", "circuit-sweep-");
    CHECK(da.filename() == db.filename());
    CHECK(da.filename().string() == "circuit-sweep-" + config::content_hash(config::defaults()));
    const auto csv = slurp(da / "circuit_sweep.csv");
    CHECK(csv == slurp(db / "circuit_sweep.csv"));
    CHECK(csv.rfind("flux_phi0,omega_a_GHz,omega_b_GHz,g2_MHz,chi_aa_MHz,chi_bb_MHz,chi_ab_MHz\n", 0) == 0);
    CHECK(csv.find('\r') == std::string::npos);
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    int rows = 0;
    while (std::getline(lines, line)) {
        ++rows;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) {
            std::string digits;
            for (char ch : cell.substr(0, cell.find('e')))
                if (std::isdigit(static_cast<unsigned char>(ch))) digits += ch;
            digits.erase(0, digits.find_first_not_of('0'));
            CHECK(digits.size() <= 12);
        }
    }
    CHECK(rows == 101);

    const auto m = read_json(da / "manifest.json");
    CHECK(m["subcommand"] == "circuit-sweep");
    CHECK(m["config_hash"] == config::content_hash(config::defaults()));
    CHECK(m["code_version"] == STIMOSC_VERSION);
    CHECK(m["wall_time_s"].get<double>() >= 0.0);
    CHECK(m.contains("truncation"));
    CHECK(m["warnings"].empty());
    for (const auto& f : m["files"]) CHECK(fs::exists(da / f.get<std::string>()));
    CHECK(fs::exists(da / "circuit-sweep.gp"));
    CHECK(slurp(da / "circuit-sweep.gp").find("circuit_sweep.csv") != std::string::npos);
}

TEST_CASE("exit codes and one-line error records") {
    const auto root = scratch("errors");
    auto r = invoke("two-tone --out " + root.string() + " --set device.C_a_fF=-5", root);
    CHECK(r.code == 2);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
    auto e = nlohmann::json::parse(r.err);
    CHECK(e["error"] == "config");
    CHECK(e["key"] == "device.C_a_fF");

    const auto bad = root / "bad.yaml";
    std::ofstream(bad) << "device:\n  C_a_fF: -450\n";
    r = invoke("circuit-sweep --out " + root.string() + " --config " + bad.string(), root);
    CHECK(r.code == 2);
    e = nlohmann::json::parse(r.err);
    CHECK(e["key"] == "device.C_a_fF");
    CHECK(e["line"] == 2);

    CHECK(invoke("frobnicate", root).code == 2);
    CHECK(invoke("", root).code == 2);
    CHECK(invoke("wigner --state minus", root).code == 2);

    r = invoke("two-tone --out " + root.string() + " --set drive.sqrt2_g2_MHz=5000", root);
    CHECK(r.code == 3);
    e = nlohmann::json::parse(r.err);
    CHECK(e["error"] == "numerical");
}

TEST_CASE("two-tone output is independent of the worker count") {
    const auto root = scratch("jobs");
    const std::string grid = " --set two_tone.probe_points=31 --set two_tone.pump_points=5";
    REQUIRE(invoke("two-tone --jobs 1 --out " + (root / "a").string() + grid, root).code == 0);
    REQUIRE(invoke("two-tone --jobs 2 --out " + (root / "b").string() + grid, root).code == 0);
    const auto da = only_dir(root / "a", "two-tone-"), db = only_dir(root / "b", "two-tone-");
    CHECK(slurp(da / "two_tone_map.csv") == slurp(db / "two_tone_map.csv"));
    CHECK(slurp(da / "two_tone.json") == slurp(db / "two_tone.json"));
    const auto m = read_json(da / "manifest.json");
    CHECK(m["truncation"]["two_tone"]["n_a"] == 3);
}

TEST_CASE("wigner --state plus writes the map, the reconstructed state and the fidelity") {
    const auto root = scratch("wigner");
    const auto r = invoke("wigner --state plus --config " + canonical + " --out " + root.string() +
                              " --set wigner.finite_displacement=false --set wigner.points=11",
                          root);
    REQUIRE(r.code == 0);
    const auto dir = only_dir(root, "wigner-");
    const auto csv = slurp(dir / "wigner_plus_map.csv");
    CHECK(csv.rfind("im_alpha,re_alpha,W\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 121);
    const auto state = read_json(dir / "wigner_plus_state.json");
    CHECK(state["n_rec"] == 4);
    CHECK(state["rho_real"].size() == 16);
    CHECK(state["target"] == "plus");
    const auto m = read_json(dir / "manifest.json");
    const double f = m["summary"]["fidelity"].get<double>();
    CHECK(f == Approx(state["fidelity"].get<double>()));
    CHECK(f > 0.8);
    CHECK(f < 1.0);
    CHECK(m["truncation"]["work_dim"] == 40);
}

TEST_CASE("selftest passes and reports every check") {
    const auto root = scratch("selftest");
    const auto r = invoke("selftest --out " + root.string(), root);
    CHECK(r.code == 0);
    const auto report = read_json(only_dir(root, "selftest-") / "selftest.json");
    CHECK(report["passed"] == true);
    CHECK(report["checks"].size() >= 10);
    for (const auto& c : report["checks"]) {
        INFO(c.dump());
        CHECK(c["passed"] == true);
    }
}

TEST_CASE("remaining subcommands run end to end on small grids") {
    const auto root = scratch("small");
    struct Case {
        std::string args, prefix, file;
    };
    const std::vector<Case> cases = {
        {"pump-probe --set pump_probe.probe_points=9 --set pump_probe.pump_points=5", "pump-probe-", "pump_probe_map.csv"},
        {"g2-sweep --set g2_sweep.points=3 --set g2_sweep.probe_points=41 --set g2_sweep.pump_points=5", "g2-sweep-",
         "g2_sweep_g2.csv"},
        {"rabi --set rabi.drive_points=5 --set rabi.amplitude_points=2 --set rabi.duration_ns=200 --set rabi.rabi_points=3 "
         "--set rabi.rabi_duration_ns=1000 --set rabi.rabi_amplitude_min_MHz=1 --set rabi.rabi_amplitude_max_MHz=3",
         "rabi-", "rabi_chevron_map.csv"},
        {"fwhm --set fwhm.points=3", "fwhm-", "fwhm_fwhm.csv"},
        {"coherence --set coherence.decay_points=6 --set coherence.t1_points=6 --set coherence.ramsey_points=12 "
         "--set coherence.ramsey_max_us=2 --set coherence.echo_points=4 --set coherence.quadrature_nodes=2",
         "coherence-", "coherent_decay_p0.csv"},
    };
    for (const auto& c : cases) {
        INFO(c.args);
        const auto r = invoke(c.args + " --out " + root.string(), root);
        INFO(r.err);
        REQUIRE(r.code == 0);
        const auto dir = only_dir(root, c.prefix);
        CHECK(fs::exists(dir / c.file));
        CHECK(fs::exists(dir / "manifest.json"));
    }
}
