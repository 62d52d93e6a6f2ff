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

#include "nmdp/envs.hpp"
#include "nmdp/occupancy.hpp"
#include "test_support.hpp"

#include <set>

using namespace nmdp;
namespace nt = nmdp::testing;

TEST_CASE("gridworld kernels") {
    SUBCASE("1x1 grid self-loops") {
        GridSpec spec;
        spec.width = spec.height = 1;
        spec.green_cells.clear();
        spec.red_cells.clear();
        const Cmp cmp = build_gridworld(spec);
        CHECK(cmp.n_states() == 1);
        CHECK((cmp.kernel().array() == 1.0).all());
        const Vector omega = occupancy(cmp, TabularPolicy::uniform(1, kGridActions)).values();
        CHECK(std::abs(nt::state_sums(omega, kGridActions)(0) - 1.0) < 1e-12);
    }
    SUBCASE("default grid is deterministic") {
        const Cmp cmp = build_gridworld(GridSpec{});
        CHECK(cmp.n_states() == 25);
        CHECK(cmp.n_actions() == 5);
        CHECK(validate_cmp(cmp).empty());
        for (int r = 0; r < cmp.kernel().rows(); ++r) {
            CHECK((cmp.kernel().row(r).array() == 1.0).count() == 1);
            CHECK((cmp.kernel().row(r).array() == 0.0).count() == 24);
        }
        // corner moves that leave the grid stay put
        CHECK(cmp.transition(0, kUp, 0) == 1.0);
        CHECK(cmp.transition(0, kLeft, 0) == 1.0);
        CHECK(cmp.transition(0, kRight, 1) == 1.0);
        CHECK(cmp.transition(0, kDown, 5) == 1.0);
        CHECK(cmp.transition(12, kStay, 12) == 1.0);
        CHECK((cmp.mu().array() == 1.0 / 25.0).all());
    }
    SUBCASE("slip spreads mass over the reachable neighbours") {
        GridSpec spec;
        spec.slip = 0.1;
        const Cmp cmp = build_gridworld(spec);
        CHECK(validate_cmp(cmp).empty());
        for (int s = 0; s < 25; ++s) {
            const int row = s / 5;
            const int col = s % 5;
            std::set<int> reachable{s};
            if (row > 0) reachable.insert(s - 5);
            if (row < 4) reachable.insert(s + 5);
            if (col > 0) reachable.insert(s - 1);
            if (col < 4) reachable.insert(s + 1);
            for (int a = 0; a < kGridActions; ++a) {
                const auto k = cmp.kernel().row(cmp.index(s, a));
                CHECK(std::abs(k.sum() - 1.0) < 1e-12);
                CHECK((k.array() > 0.0).count() <= 5);
                for (int sp = 0; sp < 25; ++sp) {
                    if (k(sp) > 0.0) CHECK(reachable.count(sp) == 1);
                }
                CHECK(k.maxCoeff() >= 0.9 - 1e-12);
            }
        }
    }
}

TEST_CASE("grid spec validation") {
    GridSpec spec;
    spec.red_cells.push_back({0, 4});
    CHECK_FALSE(validate_grid(spec).empty());
    CHECK_THROWS_AS(build_gridworld(spec), Error);
    spec = GridSpec{};
    spec.green_cells.push_back({5, 0});
    CHECK_FALSE(validate_grid(spec).empty());
    spec = GridSpec{};
    spec.slip = 1.0;
    CHECK_FALSE(validate_grid(spec).empty());
    spec = GridSpec{};
    spec.width = 0;
    CHECK_FALSE(validate_grid(spec).empty());
    CHECK(validate_grid(GridSpec{}).empty());
}

TEST_CASE("expert policy") {
    SUBCASE("no coloured cells gives the uniform policy") {
        GridSpec spec;
        spec.green_cells.clear();
        spec.red_cells.clear();
        const auto pi = build_expert_policy(build_gridworld(spec), spec);
        CHECK((pi.probs().array() - 0.2).abs().maxCoeff() < 1e-15);
    }
    SUBCASE("infinite temperature limit is uniform") {
        GridSpec spec;
        spec.temperature = 1e12;
        const auto pi = build_expert_policy(build_gridworld(spec), spec);
        CHECK((pi.probs().array() - 0.2).abs().maxCoeff() < 1e-9);
    }
    SUBCASE("default expert prefers green over red") {
        const GridSpec spec;
        const Cmp cmp = build_gridworld(spec);
        const auto pi = build_expert_policy(cmp, spec);
        CHECK(pi.interior());
        const Vector d = nt::state_sums(nt::forward_occupancy(cmp, pi.probs()), kGridActions);
        double green = 0.0;
        double red = 0.0;
        for (const auto& c : spec.green_cells) green += d(c.first * spec.width + c.second);
        for (const auto& c : spec.red_cells) red += d(c.first * spec.width + c.second);
        CHECK(green >= 2.0 * red);
    }
}

TEST_CASE("gridworld rotation symmetry") {
    GridSpec spec;
    spec.green_cells.clear();
    spec.red_cells.clear();
    const Cmp cmp = build_gridworld(spec);
    const Vector d = nt::state_sums(occupancy(cmp, TabularPolicy::uniform(25, kGridActions)).values(), kGridActions);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c) CHECK(std::abs(d(r * 5 + c) - d(c * 5 + (4 - r))) <= 1e-10);
}

TEST_CASE("two-state chain") {
    SUBCASE("uniform policy at gamma 0.5") {
        const Cmp chain = build_two_state({0.5, 1.0});
        Vector expected(4);
        expected << 0.375, 0.375, 0.125, 0.125;
        CHECK((occupancy(chain, TabularPolicy::uniform(2, 2)).values() - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("always stay keeps the start state") {
        const Cmp chain = build_two_state();
        const auto pi = deterministic_policy(chain, {kStayAction, kStayAction});
        const Vector d = nt::state_sums(occupancy(chain, pi).values(), 2);
        CHECK(std::abs(d(0) - 1.0) < 1e-12);
        CHECK(std::abs(d(1)) < 1e-12);
    }
    SUBCASE("always switch alternates") {
        const Cmp chain = build_two_state({0.5, 1.0});
        const auto pi = deterministic_policy(chain, {kSwitchAction, kSwitchAction});
        const Vector d = nt::state_sums(occupancy(chain, pi).values(), 2);
        CHECK(std::abs(d(0) - 2.0 / 3.0) < 1e-12);
        CHECK(std::abs(d(1) - 1.0 / 3.0) < 1e-12);
    }
    SUBCASE("defaults") {
        const Cmp chain = build_two_state();
        CHECK(chain.gamma() == 0.9);
        CHECK(chain.mu()(0) == 1.0);
        CHECK(validate_cmp(chain).empty());
        CHECK_THROWS_AS(build_two_state({0.9, 1.5}), Error);
    }
}
