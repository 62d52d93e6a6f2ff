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

#include "nmdp/cmp.hpp"

#include <string>
#include <utility>
#include <vector>

namespace nmdp {

/// (row, col), row 0 at the top. State index is row * width + col.
using Cell = std::pair<int, int>;

enum GridAction : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kStay = 4 };
inline constexpr int kGridActions = 5;

struct GridSpec {
    int width = 5;
    int height = 5;
    std::vector<Cell> green_cells{{0, 4}, {4, 0}};
    std::vector<Cell> red_cells{{2, 1}, {2, 2}, {2, 3}};
    double slip = 0.0;
    double gamma = 0.9;
    double temperature = 0.3;  ///< Boltzmann temperature of the expert policy
};

/// Empty list when the spec is valid.
std::vector<std::string> validate_grid(const GridSpec& spec);

/**
 * Open gridworld with actions {up, down, left, right, stay}. The intended move
 * happens with probability 1 − slip; otherwise one of the other four actions'
 * moves is taken uniformly. Off-grid moves stay in place. μ is uniform.
 */
Cmp build_gridworld(const GridSpec& spec);

/// Shaped reward: +1 on green cells, −1 on red cells, for every action.
Vector grid_shaped_reward(const GridSpec& spec);

/// Boltzmann policy softmax(Q*/τ) for the shaped reward, Q* from value iteration.
TabularPolicy build_expert_policy(const Cmp& cmp, const GridSpec& spec);

struct TwoStateParams {
    double gamma = 0.9;
    double mu0 = 1.0;  ///< μ = (mu0, 1 − mu0)
};

inline constexpr int kStayAction = 0;
inline constexpr int kSwitchAction = 1;

/// Deterministic two-state chain: action 0 keeps the state, action 1 flips it.
Cmp build_two_state(const TwoStateParams& params = {});

}  // namespace nmdp
