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

#include "nmdp/envs.hpp"

#include "nmdp/occupancy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nmdp {

namespace {

bool in_bounds(const GridSpec& spec, const Cell& c) {
    return c.first >= 0 && c.first < spec.height && c.second >= 0 && c.second < spec.width;
}

int move(const GridSpec& spec, int state, int action) {
    int row = state / spec.width;
    int col = state % spec.width;
    switch (action) {
        case kUp: --row; break;
        case kDown: ++row; break;
        case kLeft: --col; break;
        case kRight: ++col; break;
        default: break;
    }
    if (!in_bounds(spec, {row, col})) return state;
    return row * spec.width + col;
}

}  // namespace

std::vector<std::string> validate_grid(const GridSpec& spec) {
    std::vector<std::string> issues;
    if (spec.width <= 0 || spec.height <= 0) issues.push_back("grid dimensions must be positive");
    if (!(spec.slip >= 0.0 && spec.slip < 1.0)) issues.push_back("slip must lie in [0, 1)");
    if (!(spec.gamma >= 0.0 && spec.gamma < 1.0)) issues.push_back("gamma must lie in [0, 1)");
    if (!(spec.temperature > 0.0)) issues.push_back("temperature must be positive");
    auto describe = [](const Cell& c) {
        return "(" + std::to_string(c.first) + "," + std::to_string(c.second) + ")";
    };
    for (const auto& c : spec.green_cells)
        if (!in_bounds(spec, c)) issues.push_back("green cell " + describe(c) + " is out of bounds");
    for (const auto& c : spec.red_cells) {
        if (!in_bounds(spec, c)) issues.push_back("red cell " + describe(c) + " is out of bounds");
        if (std::find(spec.green_cells.begin(), spec.green_cells.end(), c) != spec.green_cells.end())
            issues.push_back("cell " + describe(c) + " is both green and red");
    }
    return issues;
}

Cmp build_gridworld(const GridSpec& spec) {
    if (auto issues = validate_grid(spec); !issues.empty()) throw Error("invalid grid spec: " + issues.front());
    const int ns = spec.width * spec.height;
    Matrix kernel = Matrix::Zero(ns * kGridActions, ns);
    for (int s = 0; s < ns; ++s) {
        for (int a = 0; a < kGridActions; ++a) {
            const int row = s * kGridActions + a;
            kernel(row, move(spec, s, a)) += 1.0 - spec.slip;
            if (spec.slip > 0.0) {
                for (int other = 0; other < kGridActions; ++other)
                    if (other != a) kernel(row, move(spec, s, other)) += spec.slip / (kGridActions - 1);
            }
        }
    }
    return Cmp(ns, kGridActions, std::move(kernel), Vector::Constant(ns, 1.0 / ns), spec.gamma);
}

Vector grid_shaped_reward(const GridSpec& spec) {
    Vector r = Vector::Zero(spec.width * spec.height * kGridActions);
    auto paint = [&](const std::vector<Cell>& cells, double value) {
        for (const auto& c : cells) {
            const int s = c.first * spec.width + c.second;
            r.segment(s * kGridActions, kGridActions).setConstant(value);
        }
    };
    paint(spec.green_cells, 1.0);
    paint(spec.red_cells, -1.0);
    return r;
}

TabularPolicy build_expert_policy(const Cmp& cmp, const GridSpec& spec) {
    if (cmp.n_states() != spec.width * spec.height || cmp.n_actions() != kGridActions)
        throw Error("expert policy: CMP does not match the grid spec");
    if (!(spec.temperature > 0.0)) throw Error("expert policy: temperature must be positive");
    const Vector reward = grid_shaped_reward(spec);
    const LinearSolution opt = solve_linear_baseline(cmp, reward);
    const Vector q = reward + cmp.gamma() * (cmp.kernel() * opt.state_values);
    Matrix logits(cmp.n_states(), cmp.n_actions());
    for (int s = 0; s < cmp.n_states(); ++s)
        for (int a = 0; a < cmp.n_actions(); ++a) logits(s, a) = q(cmp.index(s, a)) / spec.temperature;
    return TabularPolicy::from_logits(logits);
}

Cmp build_two_state(const TwoStateParams& params) {
    if (!(params.mu0 >= 0.0 && params.mu0 <= 1.0)) throw Error("two-state: mu0 must lie in [0, 1]");
    Matrix kernel(4, 2);
    // rows: (s0,stay) (s0,switch) (s1,stay) (s1,switch)
    kernel << 1.0, 0.0,
              0.0, 1.0,
              0.0, 1.0,
              1.0, 0.0;
    Vector mu(2);
    mu << params.mu0, 1.0 - params.mu0;
    return Cmp(2, 2, std::move(kernel), std::move(mu), params.gamma);
}

}  // namespace nmdp
