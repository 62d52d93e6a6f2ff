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

#pragma once

#include "nmdp/envs.hpp"
#include "nmdp/optimizers.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace nmdp {

/// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

enum class EnvironmentKind { gridworld, two_state, explicit_cmp };

struct EnvironmentSpec {
    EnvironmentKind kind = EnvironmentKind::two_state;
    GridSpec grid;
    TwoStateParams two_state;
    std::optional<Cmp> cmp;  ///< explicit_cmp only
};

/// Occupancy that JS utilities and constraints measure against.
enum class ReferenceKind { expert, uniform };

struct UtilitySpec {
    std::string kind = "entropy";  ///< linear | entropy | mixture_mi | js_to_reference
    EntropyMode entropy_mode = EntropyMode::state_action;
    LabelSpace label_space = LabelSpace::state;
    /// linear only; empty means the gridworld's shaped reward
    std::vector<double> reward;
    ReferenceKind reference = ReferenceKind::expert;
};

struct ConstraintSpec {
    ReferenceKind reference = ReferenceKind::expert;
    double threshold_bits = 0.1;
    int component = -1;  ///< -1: one constraint per mixture component
};

enum class InitKind { uniform, random, expert };

struct InitSpec {
    InitKind kind = InitKind::uniform;
    double scale = 0.1;  ///< standard deviation of the logit noise (random, expert)
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::uint64_t seed = 0;
    EnvironmentSpec environment;
    int components = 1;
    UtilitySpec utility;
    std::vector<ConstraintSpec> constraints;
    InitSpec init;
    /// `solve` runs this configuration; it also holds the geometry settings.
    OptimizerConfig optimizer;
    /// `experiment` runs each of these, in order. Geometry comes from each entry.
    std::vector<OptimizerConfig> compare;
    std::string output_dir = "out";
};

ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Built-in presets: `gridworld_fig2` and `twostate_fig3`.
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// FNV-1a hash of the canonical JSON dump, as 16 hex digits.
std::string fingerprint(const ExperimentConfig& config);

std::string to_string(EnvironmentKind kind);
std::string to_string(ReferenceKind kind);
std::string to_string(InitKind kind);
std::string to_string(EntropyMode mode);
std::string to_string(LabelSpace space);

Cmp build_environment(const EnvironmentSpec& spec);

struct BuiltExperiment {
    Problem problem;
    std::vector<Matrix> initial_thetas;
    std::optional<TabularPolicy> expert;
};

/// Builds the CMP, utility, constraints and initial logits. Throws ConfigError on inconsistencies.
BuiltExperiment build_experiment(const ExperimentConfig& config);

/// Sampling seed follows the experiment seed.
OptimizerConfig effective_optimizer(const ExperimentConfig& config, const OptimizerConfig& run);

RunLog run_single(const ExperimentConfig& config, const BuiltExperiment& built, const OptimizerConfig& run);

/// Runs every `compare` entry concurrently; results keep the configured order.
std::vector<RunLog> run_experiment(const ExperimentConfig& config);

/// Per-run final metrics keyed by optimizer name.
nlohmann::json summarize(const ExperimentConfig& config, const std::vector<RunLog>& logs);

/// Long-format `optimizer,iter,env_steps,utility_bits,constraint_bits`; constraint_bits is the largest
/// constraint value of the row, empty without constraints.
void emit_plotdata(std::ostream& os, const std::vector<RunLog>& logs);

/// Writes `<name>_<optimizer>.csv` per run, `summary.json` and `plotdata.csv` into `dir`.
void write_experiment_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                              const std::vector<RunLog>& logs);

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

struct CheckSpec {
    std::string name;
    std::string description;
    std::function<CheckResult()> run;
};

/// Every invariant of the library, each with its own oracle.
const std::vector<CheckSpec>& check_registry();

/// Runs the checks whose name contains `filter`, printing one line per check. True iff all pass.
bool run_checks(std::ostream& os, const std::string& filter = "");

}  // namespace nmdp
