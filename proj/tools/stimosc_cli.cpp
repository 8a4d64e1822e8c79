// stimosc: command-line front end.
//
//   stimosc <subcommand> [--config PATH] [--out DIR] [--jobs N] [--seed N]
//                        [--set section.key=value ...] [--state zero|one|plus]

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "stimosc/config.hpp"
#include "stimosc/errors.hpp"
#include "stimosc/runner.hpp"

namespace {

using namespace stimosc;

int fail(const std::string& kind, int code, const std::string& message, const std::string& key = {}, int line = -1) {
    std::cerr << runner::error_record(kind, code, message, key, line) << std::endl;
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation driver for a pumped bosonic oscillator coupled to a lossy buffer mode", "stimosc"};
    app.set_version_flag("--version", STIMOSC_VERSION);
    app.fallthrough();
    app.require_subcommand(0, 1);

    std::string config_path, out_dir, state;
    std::optional<int> jobs;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
    bool print_schema = false;
    app.add_option("--config", config_path, "Configuration file (YAML or JSON)")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "Output directory (overrides run.out_dir)");
    app.add_option("--jobs", jobs, "Worker threads for sweeps")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "Seed for noise realizations");
    app.add_option("--set", overrides, "Override a key: section.key=value (repeatable)")->take_all();
    app.add_flag("--print-schema", print_schema, "List every configuration key with its default and exit");

    std::string subcommand;
    for (const auto& name : runner::subcommands()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->callback([&subcommand, name] { subcommand = name; });
        if (name == "wigner") sub->add_option("--state", state, "Target state")->check(CLI::IsMember({"zero", "one", "plus"}));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", runner::exit_config, e.what());
    }

    if (print_schema) {
        std::cout << config::schema_table();
        return runner::exit_ok;
    }
    if (subcommand.empty()) return fail("usage", runner::exit_config, "a subcommand is required; see --help");

    try {
        auto cfg = config_path.empty() ? config::defaults() : config::load_config(config_path);
        for (const auto& o : overrides) config::apply_override(cfg, o);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (jobs) cfg.jobs = *jobs;
        if (seed) cfg.seed = *seed;
        if (!state.empty()) cfg.wigner.state = state;
        config::validate(cfg);

        const auto outcome = runner::run(subcommand, cfg);
        std::cout << outcome.directory.string() << std::endl;
        return outcome.exit_code;
    } catch (const ConfigError& e) {
        return fail("config", runner::exit_config, e.what(), e.key(), e.line());
    } catch (const std::invalid_argument& e) {
        return fail("config", runner::exit_config, e.what());
    } catch (const NumericalError& e) {
        return fail("numerical", runner::exit_numerical, e.what());
    } catch (const std::exception& e) {
        return fail("numerical", runner::exit_numerical, e.what());
    }
}
