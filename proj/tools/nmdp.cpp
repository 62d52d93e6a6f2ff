/*
 * Copyright 2026 The nmdp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// nmdp command line: invariant checks, single runs, paired experiments and environment dumps.

#include "nmdp/harness.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

struct RunOptions {
    std::string config_path;
    std::string preset;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string mode;
};

void add_run_options(CLI::App* cmd, RunOptions& opts, bool with_preset) {
    cmd->add_option("--config", opts.config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
    if (with_preset) cmd->add_option("--preset", opts.preset, "Built-in config: gridworld_fig2 or twostate_fig3");
    cmd->add_option("--seed", opts.seed, "Overrides the config seed");
    cmd->add_option("--out", opts.out_dir, "Output directory (overrides the config)");
    cmd->add_option("--mode", opts.mode, "Gradient mode for every run")->check(CLI::IsMember({"exact", "sampled"}));
}

nmdp::ExperimentConfig resolve_config(const RunOptions& opts, const std::string& fallback_preset) {
    if (!opts.config_path.empty() && !opts.preset.empty())
        throw nmdp::ConfigError("--config and --preset are mutually exclusive");
    nmdp::ExperimentConfig config;
    if (!opts.config_path.empty()) {
        config = nmdp::load_config(opts.config_path);
    } else if (!opts.preset.empty()) {
        config = nmdp::preset(opts.preset);
    } else if (!fallback_preset.empty()) {
        config = nmdp::preset(fallback_preset);
    } else {
        throw nmdp::ConfigError("no config given (use --config or --preset)");
    }
    if (opts.seed) config.seed = *opts.seed;
    if (!opts.out_dir.empty()) config.output_dir = opts.out_dir;
    if (!opts.mode.empty()) {
        const auto mode = nmdp::parse_gradient_mode(opts.mode);
        config.optimizer.mode = mode;
        for (auto& run : config.compare) run.mode = mode;
    }
    return config;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw nmdp::Error("cannot write '" + path.string() + "'");
    out << text;
}

int cmd_solve(const RunOptions& opts) {
    const auto config = resolve_config(opts, "");
    const auto built = nmdp::build_experiment(config);
    const nmdp::RunLog log = nmdp::run_single(config, built, config.optimizer);

    const fs::path dir = config.output_dir;
    fs::create_directories(dir);
    std::ostringstream csv;
    log.write_csv(csv);
    write_text(dir / "runlog.csv", csv.str());
    const auto& cmp = built.problem.cmp;
    for (std::size_t i = 0; i < log.final_thetas.size(); ++i) {
        const auto omega = nmdp::occupancy(cmp, nmdp::policy_from_logits(log.final_thetas[i])).values();
        std::ostringstream os;
        nmdp::write_occupancy_csv(os, cmp, omega);
        const std::string name = log.final_thetas.size() == 1 ? "occupancy.csv" : "occupancy_" + std::to_string(i) + ".csv";
        write_text(dir / name, os.str());
    }
    write_text(dir / "summary.json", nmdp::summarize(config, {log}).dump(2) + "\n");
    const auto& last = log.records.back();
    std::cout << log.optimizer << ": " << last.iter << " iterations, utility " << nmdp::format_double(last.utility_bits)
              << (built.problem.utility->entropic() ? " bits" : "") << " -> " << dir.string() << "\n";
    return 0;
}

int cmd_experiment(const RunOptions& opts, const std::string& which) {
    const std::string fallback = which == "gridworld" ? "gridworld_fig2" : "twostate_fig3";
    const auto config = resolve_config(opts, fallback);
    const auto expected = which == "gridworld" ? nmdp::EnvironmentKind::gridworld : nmdp::EnvironmentKind::two_state;
    if (config.environment.kind != expected)
        throw nmdp::ConfigError("experiment " + which + " needs a " + nmdp::to_string(expected) +
                                " environment, config has " + nmdp::to_string(config.environment.kind));
    const auto logs = nmdp::run_experiment(config);
    nmdp::write_experiment_outputs(config.output_dir, config, logs);
    for (const auto& log : logs) {
        const auto& last = log.records.back();
        std::cout << log.optimizer << ": utility " << nmdp::format_double(last.utility_bits) << " bits";
        for (std::size_t k = 0; k < last.constraint_bits.size(); ++k)
            std::cout << ", g" << k << " " << nmdp::format_double(last.constraint_bits[k]) << " bits";
        std::cout << "\n";
    }
    std::cout << "wrote " << config.output_dir << "\n";
    return 0;
}

int cmd_dump_env(const RunOptions& opts) {
    const auto config = resolve_config(opts, "");
    const std::string text = nmdp::build_environment(config.environment).to_json().dump(2) + "\n";
    if (opts.out_dir.empty()) {
        std::cout << text;
    } else {
        fs::create_directories(opts.out_dir);
        write_text(fs::path(opts.out_dir) / "env.json", text);
    }
    return 0;
}

int cmd_show_config(const RunOptions& opts) {
    std::cout << nmdp::to_json(resolve_config(opts, "")).dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tabular solver toolkit for nonlinear MDPs"};
    app.require_subcommand(1);

    std::string filter;
    bool list = false;
    auto* check = app.add_subcommand("check", "Run the invariant suite; exit 0 iff every check passes");
    check->add_option("--filter", filter, "Only run checks whose name contains this text");
    check->add_flag("--list", list, "List the checks without running them");

    RunOptions solve_opts;
    auto* solve = app.add_subcommand("solve", "Single optimization run; writes runlog.csv and occupancy CSVs");
    add_run_options(solve, solve_opts, true);

    RunOptions exp_opts;
    std::string which;
    auto* experiment = app.add_subcommand("experiment", "Paired optimizer comparison; writes one CSV per run and summary.json");
    experiment->add_option("which", which, "gridworld or twostate")->required()->check(CLI::IsMember({"gridworld", "twostate"}));
    add_run_options(experiment, exp_opts, false);

    RunOptions dump_opts;
    auto* dump = app.add_subcommand("dump-env", "Write the constructed CMP as JSON (stdout unless --out)");
    add_run_options(dump, dump_opts, true);

    RunOptions show_opts;
    auto* show = app.add_subcommand("show-config", "Print the fully resolved config");
    add_run_options(show, show_opts, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*check) {
            if (list) {
                for (const auto& c : nmdp::check_registry()) std::cout << c.name << "  " << c.description << "\n";
                return 0;
            }
            return nmdp::run_checks(std::cout, filter) ? 0 : kExitFailure;
        }
        if (*solve) return cmd_solve(solve_opts);
        if (*experiment) return cmd_experiment(exp_opts, which);
        if (*dump) return cmd_dump_env(dump_opts);
        if (*show) return cmd_show_config(show_opts);
    } catch (const nmdp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitFailure;
}
