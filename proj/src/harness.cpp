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

#include "nmdp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <random>
#include <set>
#include <sstream>

namespace nmdp {

using nlohmann::json;

namespace {

/// Object reader that rejects keys it was never asked about.
class Fields {
public:
    Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) return fallback;
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where_ + "." + key + ": wrong type");
        }
    }

    const json& at(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError(where_ + ": missing '" + key + "'");
        return j_.at(key);
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            (void)value;
            if (!seen_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
        }
    }

    const std::string& where() const { return where_; }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

template <typename F>
auto parse_enum(F parse, const std::string& value, const std::string& where) {
    try {
        return parse(value);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

EnvironmentKind parse_environment_kind(const std::string& s) {
    if (s == "gridworld") return EnvironmentKind::gridworld;
    if (s == "two_state") return EnvironmentKind::two_state;
    if (s == "cmp") return EnvironmentKind::explicit_cmp;
    throw Error("unknown environment '" + s + "' (expected gridworld, two_state or cmp)");
}

ReferenceKind parse_reference_kind(const std::string& s) {
    if (s == "expert") return ReferenceKind::expert;
    if (s == "uniform") return ReferenceKind::uniform;
    throw Error("unknown reference '" + s + "' (expected expert or uniform)");
}

InitKind parse_init_kind(const std::string& s) {
    if (s == "uniform") return InitKind::uniform;
    if (s == "random") return InitKind::random;
    if (s == "expert") return InitKind::expert;
    throw Error("unknown init '" + s + "' (expected uniform, random or expert)");
}

EntropyMode parse_entropy_mode(const std::string& s) {
    if (s == "state_action") return EntropyMode::state_action;
    if (s == "state") return EntropyMode::state;
    throw Error("unknown entropy mode '" + s + "' (expected state_action or state)");
}

LabelSpace parse_label_space(const std::string& s) {
    if (s == "state") return LabelSpace::state;
    if (s == "state_action") return LabelSpace::state_action;
    throw Error("unknown label space '" + s + "' (expected state or state_action)");
}

std::vector<Cell> parse_cells(const json& j, const std::string& where) {
    std::vector<Cell> cells;
    if (!j.is_array()) throw ConfigError(where + ": expected an array of [row, col] pairs");
    for (const auto& c : j) {
        if (!c.is_array() || c.size() != 2 || !c[0].is_number_integer() || !c[1].is_number_integer())
            throw ConfigError(where + ": expected an array of [row, col] pairs");
        cells.emplace_back(c[0].get<int>(), c[1].get<int>());
    }
    return cells;
}

json cells_json(const std::vector<Cell>& cells) {
    json out = json::array();
    for (const auto& [r, c] : cells) out.push_back({r, c});
    return out;
}

EnvironmentSpec parse_environment(const json& j) {
    Fields f(j, "environment");
    EnvironmentSpec spec;
    spec.kind = parse_enum(parse_environment_kind, f.get<std::string>("kind", "two_state"), "environment.kind");
    switch (spec.kind) {
        case EnvironmentKind::gridworld: {
            GridSpec& g = spec.grid;
            g.width = f.get("width", g.width);
            g.height = f.get("height", g.height);
            if (f.has("green_cells")) g.green_cells = parse_cells(f.at("green_cells"), "environment.green_cells");
            if (f.has("red_cells")) g.red_cells = parse_cells(f.at("red_cells"), "environment.red_cells");
            g.slip = f.get("slip", g.slip);
            g.gamma = f.get("gamma", g.gamma);
            g.temperature = f.get("temperature", g.temperature);
            break;
        }
        case EnvironmentKind::two_state:
            spec.two_state.gamma = f.get("gamma", spec.two_state.gamma);
            spec.two_state.mu0 = f.get("mu0", spec.two_state.mu0);
            break;
        case EnvironmentKind::explicit_cmp:
            try {
                spec.cmp = Cmp::from_json(f.at("cmp"));
            } catch (const ConfigError&) {
                throw;
            } catch (const Error& e) {
                throw ConfigError(std::string("environment.cmp: ") + e.what());
            }
            break;
    }
    f.finish();
    return spec;
}

json environment_json(const EnvironmentSpec& spec) {
    json j{{"kind", to_string(spec.kind)}};
    switch (spec.kind) {
        case EnvironmentKind::gridworld:
            j["width"] = spec.grid.width;
            j["height"] = spec.grid.height;
            j["green_cells"] = cells_json(spec.grid.green_cells);
            j["red_cells"] = cells_json(spec.grid.red_cells);
            j["slip"] = spec.grid.slip;
            j["gamma"] = spec.grid.gamma;
            j["temperature"] = spec.grid.temperature;
            break;
        case EnvironmentKind::two_state:
            j["gamma"] = spec.two_state.gamma;
            j["mu0"] = spec.two_state.mu0;
            break;
        case EnvironmentKind::explicit_cmp:
            j["cmp"] = spec.cmp->to_json();
            break;
    }
    return j;
}

UtilitySpec parse_utility(const json& j) {
    Fields f(j, "utility");
    UtilitySpec u;
    u.kind = f.get<std::string>("kind", u.kind);
    if (u.kind == "linear") {
        u.reward = f.get("reward", std::vector<double>{});
    } else if (u.kind == "entropy") {
        u.entropy_mode = parse_enum(parse_entropy_mode, f.get<std::string>("mode", "state_action"), "utility.mode");
    } else if (u.kind == "mixture_mi") {
        u.label_space = parse_enum(parse_label_space, f.get<std::string>("label_space", "state"), "utility.label_space");
    } else if (u.kind == "js_to_reference") {
        u.reference = parse_enum(parse_reference_kind, f.get<std::string>("reference", "expert"), "utility.reference");
    } else {
        throw ConfigError("utility.kind: unknown utility '" + u.kind +
                          "' (expected linear, entropy, mixture_mi or js_to_reference)");
    }
    f.finish();
    return u;
}

json utility_json(const UtilitySpec& u) {
    json j{{"kind", u.kind}};
    if (u.kind == "linear") {
        j["reward"] = u.reward;
    } else if (u.kind == "entropy") {
        j["mode"] = to_string(u.entropy_mode);
    } else if (u.kind == "mixture_mi") {
        j["label_space"] = to_string(u.label_space);
    } else {
        j["reference"] = to_string(u.reference);
    }
    return j;
}

ConstraintSpec parse_constraint(const json& j, std::size_t index) {
    const std::string where = "constraints[" + std::to_string(index) + "]";
    Fields f(j, where);
    const auto kind = f.get<std::string>("kind", "js_to_reference");
    if (kind != "js_to_reference")
        throw ConfigError(where + ".kind: unknown constraint '" + kind + "' (expected js_to_reference)");
    ConstraintSpec c;
    c.reference = parse_enum(parse_reference_kind, f.get<std::string>("reference", "expert"), where + ".reference");
    c.threshold_bits = f.get("threshold_bits", c.threshold_bits);
    if (f.has("component")) {
        const json& comp = f.at("component");
        if (comp.is_string() && comp.get<std::string>() == "all") {
            c.component = -1;
        } else if (comp.is_number_integer() && comp.get<int>() >= 0) {
            c.component = comp.get<int>();
        } else {
            throw ConfigError(where + ".component: expected \"all\" or a nonnegative index");
        }
    }
    f.finish();
    return c;
}

json constraint_json(const ConstraintSpec& c) {
    json j{{"kind", "js_to_reference"}, {"reference", to_string(c.reference)}, {"threshold_bits", c.threshold_bits}};
    if (c.component < 0) {
        j["component"] = "all";
    } else {
        j["component"] = c.component;
    }
    return j;
}

OptimizerConfig parse_optimizer(const json& j, const std::string& where) {
    Fields f(j, where);
    OptimizerConfig o;
    o.kind = parse_enum(parse_optimizer_kind, f.get<std::string>("kind", to_string(o.kind)), where + ".kind");
    o.iterations = f.get("iterations", o.iterations);
    o.step_size = f.get("step_size", o.step_size);
    o.dual_step_size = f.get("dual_step_size", o.dual_step_size);
    o.mode = parse_enum(parse_gradient_mode, f.get<std::string>("mode", to_string(o.mode)), where + ".mode");
    o.sampling.n_traj = f.get("n_traj", o.sampling.n_traj);
    o.sampling.horizon = f.get("horizon", o.sampling.horizon);
    o.tol = f.get("tol", o.tol);
    o.damping = f.get("damping", o.damping);
    o.max_halvings = f.get("max_halvings", o.max_halvings);
    o.inner_steps = f.get("inner_steps", o.inner_steps);
    o.inner_lr = f.get("inner_lr", o.inner_lr);
    o.record_wall_time = f.get("record_wall_time", o.record_wall_time);
    if (f.has("geometry")) {
        Fields g(f.at("geometry"), where + ".geometry");
        o.potential = parse_enum(parse_potential_kind, g.get<std::string>("potential", to_string(o.potential)),
                                 g.where() + ".potential");
        o.identity_metric = g.get("identity_metric", o.identity_metric);
        if (g.has("barrier")) {
            Fields b(g.at("barrier"), g.where() + ".barrier");
            o.ell = parse_enum(parse_barrier_kind, b.get<std::string>("ell", to_string(o.ell)), b.where() + ".ell");
            o.beta = b.get("beta", o.beta);
            b.finish();
        }
        g.finish();
    }
    f.finish();

    if (o.iterations < 0) throw ConfigError(where + ".iterations must be nonnegative");
    if (!(o.step_size >= 0.0) || !std::isfinite(o.step_size)) throw ConfigError(where + ".step_size must be finite and nonnegative");
    if (!(o.dual_step_size >= 0.0)) throw ConfigError(where + ".dual_step_size must be nonnegative");
    if (o.sampling.n_traj <= 0) throw ConfigError(where + ".n_traj must be positive");
    if (o.sampling.horizon < 0) throw ConfigError(where + ".horizon must be nonnegative (0 selects it automatically)");
    if (!(o.tol >= 0.0)) throw ConfigError(where + ".tol must be nonnegative");
    if (!(o.damping >= 0.0)) throw ConfigError(where + ".damping must be nonnegative");
    if (o.max_halvings < 0) throw ConfigError(where + ".max_halvings must be nonnegative");
    if (o.inner_steps <= 0) throw ConfigError(where + ".inner_steps must be positive");
    if (!(o.inner_lr > 0.0)) throw ConfigError(where + ".inner_lr must be positive");
    if (!(o.beta > 0.0)) throw ConfigError(where + ".geometry.barrier.beta must be positive");
    return o;
}

json optimizer_json(const OptimizerConfig& o) {
    return {{"kind", to_string(o.kind)},
            {"iterations", o.iterations},
            {"step_size", o.step_size},
            {"dual_step_size", o.dual_step_size},
            {"mode", to_string(o.mode)},
            {"n_traj", o.sampling.n_traj},
            {"horizon", o.sampling.horizon},
            {"tol", o.tol},
            {"damping", o.damping},
            {"max_halvings", o.max_halvings},
            {"inner_steps", o.inner_steps},
            {"inner_lr", o.inner_lr},
            {"record_wall_time", o.record_wall_time},
            {"geometry",
             {{"potential", to_string(o.potential)},
              {"identity_metric", o.identity_metric},
              {"barrier", {{"ell", to_string(o.ell)}, {"beta", o.beta}}}}}};
}

/// Checks that need the whole config; shape checks against the CMP happen in build_experiment.
void validate(const ExperimentConfig& c) {
    if (c.components < 1) throw ConfigError("components must be at least 1");
    if (c.utility.kind == "mixture_mi" && c.components < 2)
        throw ConfigError("utility mixture_mi needs at least 2 components");
    const bool grid = c.environment.kind == EnvironmentKind::gridworld;
    const auto needs_expert = [&](ReferenceKind r, const std::string& what) {
        if (r == ReferenceKind::expert && !grid) throw ConfigError(what + ": the expert reference needs a gridworld");
    };
    if (c.utility.kind == "js_to_reference") needs_expert(c.utility.reference, "utility");
    if (c.utility.kind == "linear" && c.utility.reward.empty() && !grid)
        throw ConfigError("utility: an empty reward means the shaped gridworld reward, which needs a gridworld");
    for (std::size_t k = 0; k < c.constraints.size(); ++k) {
        const auto& con = c.constraints[k];
        needs_expert(con.reference, "constraints[" + std::to_string(k) + "]");
        if (con.component >= c.components)
            throw ConfigError("constraints[" + std::to_string(k) + "].component exceeds the mixture size");
        if (!std::isfinite(con.threshold_bits))
            throw ConfigError("constraints[" + std::to_string(k) + "].threshold_bits must be finite");
    }
    if (c.init.kind == InitKind::expert && !grid) throw ConfigError("init: the expert initialization needs a gridworld");
    if (!(c.init.scale >= 0.0)) throw ConfigError("init.scale must be nonnegative");
    if (grid) {
        const auto errs = validate_grid(c.environment.grid);
        if (!errs.empty()) throw ConfigError("environment: " + errs.front());
    }
    std::set<OptimizerKind> kinds;
    for (const auto& o : c.compare)
        if (!kinds.insert(o.kind).second)
            throw ConfigError("compare: optimizer '" + to_string(o.kind) + "' appears twice");
    if (c.output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

}  // namespace

std::string to_string(EnvironmentKind kind) {
    switch (kind) {
        case EnvironmentKind::gridworld: return "gridworld";
        case EnvironmentKind::two_state: return "two_state";
        case EnvironmentKind::explicit_cmp: return "cmp";
    }
    return "?";
}

std::string to_string(ReferenceKind kind) { return kind == ReferenceKind::expert ? "expert" : "uniform"; }

std::string to_string(InitKind kind) {
    switch (kind) {
        case InitKind::uniform: return "uniform";
        case InitKind::random: return "random";
        case InitKind::expert: return "expert";
    }
    return "?";
}

std::string to_string(EntropyMode mode) { return mode == EntropyMode::state_action ? "state_action" : "state"; }
std::string to_string(LabelSpace space) { return space == LabelSpace::state ? "state" : "state_action"; }

ExperimentConfig parse_config(const json& j) {
    Fields f(j, "config");
    ExperimentConfig c;
    c.name = f.get("name", c.name);
    if (f.has("seed")) {
        const json& s = f.at("seed");
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
            throw ConfigError("config.seed: expected a nonnegative integer");
        c.seed = s.get<std::uint64_t>();
    }
    if (f.has("environment")) c.environment = parse_environment(f.at("environment"));
    c.components = f.get("components", c.components);
    if (f.has("utility")) c.utility = parse_utility(f.at("utility"));
    if (f.has("constraints")) {
        const json& cs = f.at("constraints");
        if (!cs.is_array()) throw ConfigError("constraints: expected an array");
        for (std::size_t k = 0; k < cs.size(); ++k) c.constraints.push_back(parse_constraint(cs[k], k));
    }
    if (f.has("init")) {
        Fields i(f.at("init"), "init");
        c.init.kind = parse_enum(parse_init_kind, i.get<std::string>("kind", "uniform"), "init.kind");
        c.init.scale = i.get("scale", c.init.scale);
        i.finish();
    }
    if (f.has("optimizer")) c.optimizer = parse_optimizer(f.at("optimizer"), "optimizer");
    if (f.has("compare")) {
        const json& cs = f.at("compare");
        if (!cs.is_array()) throw ConfigError("compare: expected an array");
        for (std::size_t k = 0; k < cs.size(); ++k)
            c.compare.push_back(parse_optimizer(cs[k], "compare[" + std::to_string(k) + "]"));
    }
    c.output_dir = f.get("output_dir", c.output_dir);
    f.finish();
    validate(c);
    return c;
}

json to_json(const ExperimentConfig& c) {
    json constraints = json::array();
    for (const auto& con : c.constraints) constraints.push_back(constraint_json(con));
    json compare = json::array();
    for (const auto& o : c.compare) compare.push_back(optimizer_json(o));
    return {{"name", c.name},
            {"seed", c.seed},
            {"environment", environment_json(c.environment)},
            {"components", c.components},
            {"utility", utility_json(c.utility)},
            {"constraints", constraints},
            {"init", {{"kind", to_string(c.init.kind)}, {"scale", c.init.scale}}},
            {"optimizer", optimizer_json(c.optimizer)},
            {"compare", compare},
            {"output_dir", c.output_dir}};
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

std::vector<std::string> preset_names() { return {"gridworld_fig2", "twostate_fig3"}; }

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig c;
    c.name = name;
    if (name == "gridworld_fig2") {
        c.environment.kind = EnvironmentKind::gridworld;
        c.components = 2;
        c.utility.kind = "mixture_mi";
        c.utility.label_space = LabelSpace::state;
        c.constraints.push_back(ConstraintSpec{ReferenceKind::expert, 0.1, -1});
        c.init = {InitKind::expert, 0.1};
        OptimizerConfig vpg;
        vpg.kind = OptimizerKind::vpg;
        vpg.iterations = 200;
        vpg.step_size = 20.0;
        vpg.dual_step_size = 10.0;
        OptimizerConfig hpg;
        hpg.iterations = 200;
        hpg.step_size = 2.0;
        hpg.potential = PotentialKind::barrier;
        hpg.beta = 0.01;
        c.optimizer = hpg;
        c.compare = {vpg, hpg};
    } else if (name == "twostate_fig3") {
        c.environment.kind = EnvironmentKind::two_state;
        c.utility.kind = "entropy";
        c.utility.entropy_mode = EntropyMode::state_action;
        c.init = {InitKind::random, 2.0};
        OptimizerConfig vpg;
        vpg.kind = OptimizerKind::vpg;
        vpg.iterations = 100;
        OptimizerConfig hpg = vpg;
        hpg.kind = OptimizerKind::hpg;
        c.optimizer = hpg;
        c.compare = {vpg, hpg};
    } else {
        throw ConfigError("unknown preset '" + name + "' (expected gridworld_fig2 or twostate_fig3)");
    }
    c.output_dir = "out/" + name;
    validate(c);
    return c;
}

std::string fingerprint(const ExperimentConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : to_json(config).dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Cmp build_environment(const EnvironmentSpec& spec) {
    try {
        switch (spec.kind) {
            case EnvironmentKind::gridworld: return build_gridworld(spec.grid);
            case EnvironmentKind::two_state: return build_two_state(spec.two_state);
            case EnvironmentKind::explicit_cmp:
                if (!spec.cmp) throw ConfigError("environment: cmp kind without a CMP");
                return *spec.cmp;
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("environment: ") + e.what());
    }
    throw ConfigError("environment: unknown kind");
}

BuiltExperiment build_experiment(const ExperimentConfig& config) {
    validate(config);
    Cmp cmp = build_environment(config.environment);
    const int ns = cmp.n_states();
    const int na = cmp.n_actions();

    std::optional<TabularPolicy> expert;
    if (config.environment.kind == EnvironmentKind::gridworld) expert = build_expert_policy(cmp, config.environment.grid);
    const auto reference = [&](ReferenceKind kind) {
        return occupancy(cmp, kind == ReferenceKind::expert ? *expert : TabularPolicy::uniform(ns, na));
    };

    UtilityPtr utility;
    const UtilitySpec& u = config.utility;
    if (u.kind == "linear") {
        Vector r;
        if (u.reward.empty()) {
            r = grid_shaped_reward(config.environment.grid);
        } else {
            if (static_cast<int>(u.reward.size()) != cmp.n_pairs())
                throw ConfigError("utility.reward: expected " + std::to_string(cmp.n_pairs()) + " entries, got " +
                                  std::to_string(u.reward.size()));
            r = Eigen::Map<const Vector>(u.reward.data(), cmp.n_pairs());
        }
        utility = linear_utility(std::move(r));
    } else if (u.kind == "entropy") {
        utility = entropy_utility(u.entropy_mode, na);
    } else if (u.kind == "mixture_mi") {
        utility = mixture_mutual_information(u.label_space, na);
    } else {
        utility = js_to_reference(reference(u.reference));
    }

    std::vector<Constraint> constraints;
    for (const auto& c : config.constraints) {
        const auto js = js_to_reference(reference(c.reference));
        if (c.component < 0) {
            for (int i = 0; i < config.components; ++i)
                constraints.push_back(make_constraint(js, c.threshold_bits, static_cast<std::size_t>(i)));
        } else {
            constraints.push_back(make_constraint(js, c.threshold_bits, static_cast<std::size_t>(c.component)));
        }
    }

    std::vector<Matrix> thetas;
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < config.components; ++i) {
        Matrix t = Matrix::Zero(ns, na);
        if (config.init.kind == InitKind::expert) t = expert->probs().array().log().matrix();
        if (config.init.kind != InitKind::uniform)
            for (int s = 0; s < ns; ++s)
                for (int a = 0; a < na; ++a) t(s, a) += config.init.scale * normal(rng);
        thetas.push_back(std::move(t));
    }

    Vector weights = Vector::Constant(config.components, 1.0 / config.components);
    return BuiltExperiment{Problem{std::move(cmp), std::move(utility), std::move(constraints), std::move(weights)},
                           std::move(thetas), std::move(expert)};
}

OptimizerConfig effective_optimizer(const ExperimentConfig& config, const OptimizerConfig& run) {
    OptimizerConfig o = run;
    o.sampling.seed = config.seed;
    return o;
}

RunLog run_single(const ExperimentConfig& config, const BuiltExperiment& built, const OptimizerConfig& run) {
    RunLog log = run_optimization(built.problem, built.initial_thetas, effective_optimizer(config, run));
    log.fingerprint = fingerprint(config);
    return log;
}

std::vector<RunLog> run_experiment(const ExperimentConfig& config) {
    if (config.compare.empty()) throw ConfigError("experiment: 'compare' lists no optimizers");
    const BuiltExperiment built = build_experiment(config);
    std::vector<std::future<RunLog>> futures;
    for (const auto& run : config.compare)
        futures.push_back(std::async(std::launch::async, [&config, &built, run] { return run_single(config, built, run); }));
    std::vector<RunLog> logs;
    for (auto& f : futures) logs.push_back(f.get());
    return logs;
}

json summarize(const ExperimentConfig& config, const std::vector<RunLog>& logs) {
    json runs = json::object();
    for (const auto& log : logs) {
        if (log.records.empty()) throw Error("summarize: empty run log");
        const RunRecord& last = log.records.back();
        const bool feasible =
            std::all_of(last.constraint_bits.begin(), last.constraint_bits.end(), [](double g) { return g <= 0.0; });
        runs[log.optimizer] = {{"final_utility_bits", last.utility_bits},
                               {"final_constraint_bits", last.constraint_bits},
                               {"feasible", feasible},
                               {"iterations", last.iter},
                               {"env_steps", last.env_steps}};
    }
    return {{"name", config.name}, {"seed", config.seed}, {"fingerprint", fingerprint(config)}, {"runs", runs}};
}

void emit_plotdata(std::ostream& os, const std::vector<RunLog>& logs) {
    if (logs.empty()) throw Error("emit_plotdata: no run logs");
    os << "optimizer,iter,env_steps,utility_bits,constraint_bits\n";
    for (const auto& log : logs) {
        for (const auto& r : log.records) {
            os << log.optimizer << ',' << r.iter << ',' << r.env_steps << ',' << format_double(r.utility_bits) << ',';
            if (!r.constraint_bits.empty())
                os << format_double(*std::max_element(r.constraint_bits.begin(), r.constraint_bits.end()));
            os << '\n';
        }
    }
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace

void write_experiment_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                              const std::vector<RunLog>& logs) {
    std::filesystem::create_directories(dir);
    for (const auto& log : logs) {
        std::ostringstream os;
        log.write_csv(os);
        write_file(dir / (config.name + "_" + log.optimizer + ".csv"), os.str());
    }
    write_file(dir / "summary.json", summarize(config, logs).dump(2) + "\n");
    std::ostringstream plot;
    emit_plotdata(plot, logs);
    write_file(dir / "plotdata.csv", plot.str());
}

}  // namespace nmdp
