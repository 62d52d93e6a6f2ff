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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nmdp/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

using namespace nmdp;
using nlohmann::json;

namespace {

std::size_t count_lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ExperimentConfig short_twostate(int iterations) {
    ExperimentConfig c = preset("twostate_fig3");
    for (auto& run : c.compare) run.iterations = iterations;
    c.optimizer.iterations = iterations;
    return c;
}

}  // namespace

TEST_CASE("presets") {
    for (const auto& name : preset_names()) {
        CAPTURE(name);
        const ExperimentConfig c = preset(name);
        CHECK(c.name == name);
        CHECK(c.compare.size() == 2);
        const BuiltExperiment built = build_experiment(c);
        CHECK(built.initial_thetas.size() == static_cast<std::size_t>(c.components));
        CHECK(built.problem.n_components() == static_cast<std::size_t>(c.components));
    }
    CHECK_THROWS_AS(preset("nope"), ConfigError);
    const BuiltExperiment grid = build_experiment(preset("gridworld_fig2"));
    CHECK(grid.expert.has_value());
    CHECK(grid.problem.constraints.size() == 2);
}

TEST_CASE("shipped configs match the presets") {
    for (const auto& name : preset_names()) {
        CAPTURE(name);
        const auto path = std::filesystem::path(NMDP_SOURCE_DIR) / "configs" / (name + ".json");
        CHECK(to_json(load_config(path)) == to_json(preset(name)));
    }
}

TEST_CASE("config round trip and strict parsing") {
    for (const auto& name : preset_names()) {
        const json j = to_json(preset(name));
        CHECK(to_json(parse_config(json::parse(j.dump()))) == j);
        CHECK(fingerprint(parse_config(j)) == fingerprint(preset(name)));
    }
    const json base = to_json(preset("twostate_fig3"));
    SUBCASE("unknown top-level key") {
        json j = base;
        j["learning_rate"] = 1.0;
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
    SUBCASE("unknown nested key") {
        json j = base;
        j["optimizer"]["momentum"] = 0.9;
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
    SUBCASE("unknown kinds") {
        json j = base;
        j["utility"]["kind"] = "banana";
        CHECK_THROWS_AS(parse_config(j), ConfigError);
        j = base;
        j["environment"]["kind"] = "maze";
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
    SUBCASE("negative seed") {
        json j = base;
        j["seed"] = -1;
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
    SUBCASE("expert reference needs a gridworld") {
        json j = base;
        j["constraints"] = json::array({{{"kind", "js_to_reference"}, {"reference", "expert"}}});
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
    SUBCASE("mixture utility needs two components") {
        json j = to_json(preset("gridworld_fig2"));
        j["components"] = 1;
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
    SUBCASE("duplicate optimizer kinds in compare") {
        json j = base;
        j["compare"][1] = j["compare"][0];
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
    SUBCASE("missing file and malformed JSON") {
        CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
        const auto path = std::filesystem::temp_directory_path() / "nmdp_bad_config.json";
        std::ofstream(path) << "{ \"name\": ";
        CHECK_THROWS_AS(load_config(path), ConfigError);
        std::filesystem::remove(path);
    }
}

TEST_CASE("linear reward length is validated at build time") {
    ExperimentConfig c = preset("twostate_fig3");
    c.utility.kind = "linear";
    c.utility.reward = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(build_experiment(c), ConfigError);
    c.utility.reward = {1.0, 0.0, 0.0, 1.0};
    CHECK_NOTHROW(build_experiment(c));
}

TEST_CASE("initial logits follow the seed") {
    ExperimentConfig c = preset("twostate_fig3");
    const auto a = build_experiment(c).initial_thetas;
    const auto b = build_experiment(c).initial_thetas;
    c.seed = 7;
    const auto other = build_experiment(c).initial_thetas;
    CHECK(a[0] == b[0]);
    CHECK(a[0] != other[0]);
    c.init.kind = InitKind::uniform;
    CHECK(build_experiment(c).initial_thetas[0].isZero(0.0));
}

TEST_CASE("zero iterations log the initial iterate only") {
    const ExperimentConfig c = short_twostate(0);
    const BuiltExperiment built = build_experiment(c);
    const RunLog log = run_single(c, built, c.optimizer);
    REQUIRE(log.records.size() == 1);
    CHECK(log.records[0].iter == 0);
    CHECK(log.fingerprint == fingerprint(c));
}

TEST_CASE("plot data") {
    const ExperimentConfig c = short_twostate(5);
    const auto logs = run_experiment(c);
    REQUIRE(logs.size() == 2);
    CHECK(logs[0].optimizer == "vpg");
    CHECK(logs[1].optimizer == "hpg");

    std::ostringstream one;
    emit_plotdata(one, {logs[0]});
    CHECK(count_lines(one.str()) == logs[0].records.size() + 1);
    CHECK(one.str().rfind("optimizer,iter,env_steps,utility_bits,constraint_bits\n", 0) == 0);

    std::ostringstream both;
    emit_plotdata(both, logs);
    const std::string text = both.str();
    CHECK(count_lines(text) == logs[0].records.size() + logs[1].records.size() + 1);
    CHECK(text.find("\nvpg,0,") != std::string::npos);
    CHECK(text.find("\nhpg,0,") != std::string::npos);
    // no constraints: the last column stays empty
    CHECK(text.find(",\n") != std::string::npos);
    CHECK_THROWS_AS(emit_plotdata(both, {}), Error);
}

TEST_CASE("summary") {
    const ExperimentConfig c = short_twostate(3);
    const auto logs = run_experiment(c);
    const json s = summarize(c, logs);
    CHECK(s["fingerprint"] == fingerprint(c));
    for (const char* name : {"vpg", "hpg"}) {
        CAPTURE(name);
        const json& run = s["runs"][name];
        for (const char* key : {"final_utility_bits", "final_constraint_bits", "feasible", "iterations", "env_steps"})
            CHECK(run.contains(key));
        CHECK(run["env_steps"] == 0);
    }
}

TEST_CASE("experiment outputs are deterministic") {
    const ExperimentConfig c = short_twostate(10);
    const auto dir = std::filesystem::temp_directory_path() / "nmdp_test_harness";
    std::filesystem::remove_all(dir);
    write_experiment_outputs(dir / "a", c, run_experiment(c));
    write_experiment_outputs(dir / "b", c, run_experiment(c));
    for (const std::string file : {"twostate_fig3_vpg.csv", "twostate_fig3_hpg.csv", "summary.json", "plotdata.csv"}) {
        CAPTURE(file);
        const std::string a = read_file(dir / "a" / file);
        CHECK(!a.empty());
        CHECK(a == read_file(dir / "b" / file));
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("sampling seed follows the experiment seed") {
    ExperimentConfig c = preset("twostate_fig3");
    c.seed = 99;
    CHECK(effective_optimizer(c, c.optimizer).sampling.seed == 99);
}
