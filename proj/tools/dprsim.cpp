// dprsim — deterministic simulator of DPS/COW quantum key distribution links
// and of bright-illumination detector-control attacks against them.
//
// Subcommands:
//   simulate     run one scenario from a JSON config, emit a JSON result
//   feasibility  evaluate the detector-control threshold inequalities
//   sweep        run a parameter grid from a JSON config, emit CSV
//
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpr/analysis.hpp"
#include "dpr/scenario.hpp"

namespace {

using nlohmann::json;

/// --out resolution: absolute paths win; bare/relative names land in
/// $DPRSIM_OUTPUT_DIR when it is set.
std::filesystem::path resolve_output_path(const std::string& out) {
    std::filesystem::path p{out};
    if (p.is_absolute()) return p;
    if (const char* dir = std::getenv("DPRSIM_OUTPUT_DIR")) {
        return std::filesystem::path{dir} / p;
    }
    return p;
}

void write_output(const std::string& out, const std::string& text) {
    if (out.empty()) {
        std::cout << text;
        return;
    }
    const auto path = resolve_output_path(out);
    std::ofstream file{path};
    if (!file) {
        throw std::runtime_error("cannot open output file: " + path.string());
    }
    file << text;
    if (!file) {
        throw std::runtime_error("failed while writing: " + path.string());
    }
}

json load_json_file(const std::string& path) {
    std::ifstream file{path};
    if (!file) {
        throw dpr::cli::ConfigError("", "cannot open config file: " + path);
    }
    json j;
    try {
        file >> j;
    } catch (const json::parse_error& e) {
        throw dpr::cli::ConfigError("", std::string("invalid JSON: ") + e.what());
    }
    return j;
}

json feasibility_flags_to_json(const dpr::analysis::FeasibilityReport& report) {
    return dpr::cli::feasibility_to_json(report);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"DPS/COW quantum key distribution and detector-control attack simulator"};
    app.require_subcommand(1);

    // simulate ---------------------------------------------------------------
    auto* simulate_cmd = app.add_subcommand("simulate", "run one scenario");
    std::string sim_config_path;
    std::string sim_out;
    std::optional<std::uint64_t> sim_seed;
    bool sim_emit_record = false;
    simulate_cmd->add_option("--config", sim_config_path, "scenario JSON file")
        ->required();
    simulate_cmd->add_option("--out", sim_out, "output path (default: stdout)");
    simulate_cmd->add_option("--seed", sim_seed, "override the config seed");
    simulate_cmd->add_flag("--emit-record", sim_emit_record,
                           "include the full detection record in the result");

    // feasibility ------------------------------------------------------------
    auto* feas_cmd = app.add_subcommand(
        "feasibility", "evaluate the detector-control threshold inequalities");
    std::string feas_protocol;
    bool feas_relaxed = false;
    bool feas_one_monitor = false;
    bool feas_table1 = false;
    std::optional<double> p_never, p_always;
    std::optional<double> p_never_m, p_always_m, p_never_b, p_always_b, t_b;
    std::vector<double> t_b_list{0.5, 0.8, 0.9, 0.95};
    std::string feas_out;
    feas_cmd->add_option("--protocol", feas_protocol, "dps or cow")->required();
    feas_cmd->add_flag("--relaxed", feas_relaxed,
                       "pulse-pair regime: splitting factor 2 becomes 4");
    feas_cmd->add_flag("--one-monitor", feas_one_monitor,
                       "single monitoring detector (COW)");
    feas_cmd->add_flag("--table1", feas_table1,
                       "emit the data-detector threshold table as CSV (COW)");
    feas_cmd->add_option("--p-never", p_never, "P_never in µW (DPS)");
    feas_cmd->add_option("--p-always", p_always, "P_always in µW (DPS)");
    feas_cmd->add_option("--p-never-m", p_never_m, "monitor P_never in µW (COW)");
    feas_cmd->add_option("--p-always-m", p_always_m, "monitor P_always in µW (COW)");
    feas_cmd->add_option("--p-never-b", p_never_b, "data P_never in µW (COW)");
    feas_cmd->add_option("--p-always-b", p_always_b, "data P_always in µW (COW)");
    feas_cmd->add_option("--t-b", t_b, "coupler fraction routed to the data detector");
    feas_cmd->add_option("--t-b-list", t_b_list,
                         "splitting ratios for --table1 (default 0.5 0.8 0.9 0.95)");
    feas_cmd->add_option("--out", feas_out, "output path (default: stdout)");

    // sweep --------------------------------------------------------------------
    auto* sweep_cmd = app.add_subcommand("sweep", "run a parameter grid, emit CSV");
    std::string sweep_config_path;
    std::string sweep_out;
    unsigned sweep_threads = 1;
    sweep_cmd->add_option("--config", sweep_config_path, "sweep JSON file")->required();
    sweep_cmd->add_option("--out", sweep_out, "output path (default: stdout)");
    sweep_cmd->add_option("--threads", sweep_threads,
                          "grid points to run concurrently (output is identical)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return 2;
    }

    try {
        if (simulate_cmd->parsed()) {
            json config = load_json_file(sim_config_path);
            dpr::cli::ScenarioConfig cfg = dpr::cli::parse_scenario_config(config);
            if (sim_seed) cfg.seed = *sim_seed;
            if (sim_emit_record) cfg.emit_record = true;
            if (sim_out.empty() && cfg.out_path) sim_out = *cfg.out_path;
            const auto result = dpr::cli::simulate(cfg);
            write_output(sim_out, result.document.dump(2) + "\n");
            return 0;
        }

        if (feas_cmd->parsed()) {
            if (feas_protocol != "dps" && feas_protocol != "cow") {
                throw dpr::cli::ConfigError("protocol", "expected \"dps\" or \"cow\"");
            }
            if (feas_protocol == "dps") {
                if (!p_never || !p_always) {
                    throw dpr::cli::ConfigError("", "--p-never and --p-always are required");
                }
                dpr::detectors::LinearModeConfig thresholds;
                thresholds.p_never_uw = *p_never;
                thresholds.p_always_uw = *p_always;
                const auto report =
                    dpr::analysis::check_dps_feasibility(thresholds, feas_relaxed);
                write_output(feas_out, feasibility_flags_to_json(report).dump(2) + "\n");
                return 0;
            }
            if (!p_never_m || !p_always_m) {
                throw dpr::cli::ConfigError("", "--p-never-m and --p-always-m are required");
            }
            if (feas_table1) {
                write_output(feas_out,
                             dpr::cli::table1_csv(t_b_list, *p_never_m, *p_always_m));
                return 0;
            }
            if (!p_never_b || !p_always_b || !t_b) {
                throw dpr::cli::ConfigError(
                    "", "--p-never-b, --p-always-b and --t-b are required");
            }
            dpr::detectors::LinearModeConfig monitor;
            monitor.p_never_uw = *p_never_m;
            monitor.p_always_uw = *p_always_m;
            dpr::detectors::LinearModeConfig data;
            data.p_never_uw = *p_never_b;
            data.p_always_uw = *p_always_b;
            const auto report = dpr::analysis::check_cow_feasibility(
                monitor, data, *t_b, feas_relaxed, feas_one_monitor);
            write_output(feas_out, feasibility_flags_to_json(report).dump(2) + "\n");
            return 0;
        }

        if (sweep_cmd->parsed()) {
            json config = load_json_file(sweep_config_path);
            const auto sweep = dpr::cli::parse_sweep_config(config);
            write_output(sweep_out, dpr::cli::run_sweep(sweep, sweep_threads));
            return 0;
        }
    } catch (const dpr::cli::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid parameter: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
