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

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <vector>

namespace nmdp {

/// Discounted state-action occupancy, a probability vector in state-action order.
class Occupancy {
public:
    Occupancy() = default;
    /// Checks nonnegativity and unit mass (1e-10); does not check Bellman flow.
    explicit Occupancy(Vector values);

    const Vector& values() const { return values_; }
    double operator()(Eigen::Index i) const { return values_(i); }
    Eigen::Index size() const { return values_.size(); }

    /// Σ_a ω(s,a).
    Vector state_marginal(int n_actions) const;

private:
    Vector values_;
};

inline constexpr double kOccupancyMassTol = 1e-10;

/**
 * Successor representation with the conditioning convention
 * `matrix(x, y) = M(x | y)`: the expected discounted number of visits to the
 * pair x when starting from the pair y and following π afterwards.
 *
 * With P^π the forward pair-to-pair kernel (row = current pair), the matrix is
 * [(I − γ P^π)^{-1}]^T. It satisfies M = I + γ M (P^π)^T.
 */
struct SuccessorRep {
    Matrix matrix;
};

/// Forward pair-to-pair kernel: P^π((s,a),(s',a')) = P(s'|s,a) π(a'|s').
Matrix pair_transition_matrix(const Cmp& cmp, const TabularPolicy& pi);

/// State-to-state kernel under π: P_π(s, s') = Σ_a π(a|s) P(s'|s,a).
Matrix state_transition_matrix(const Cmp& cmp, const TabularPolicy& pi);

SuccessorRep successor_representation(const Cmp& cmp, const TabularPolicy& pi);

/// Occupancy through the successor representation: ω = (1−γ) M (π ⊙ μ).
Vector occupancy_via_successor(const Cmp& cmp, const TabularPolicy& pi, const SuccessorRep& sr);

/// Occupancy through the state flow system (I − γ P_πᵀ) d = (1−γ) μ, then ω = d ⊙ π.
Vector occupancy_via_flow(const Cmp& cmp, const TabularPolicy& pi);

/**
 * Exact occupancy. Both routes are computed and must agree within 1e-10;
 * a disagreement raises an Error.
 */
Occupancy occupancy(const Cmp& cmp, const TabularPolicy& pi);

/// sup_s |Σ_a ω(s,a) − (1−γ)μ(s) − γ Σ_{s',a'} P(s|s',a') ω(s',a')|.
double bellman_flow_residual(const Cmp& cmp, const Vector& omega);

/// |Σ ω − 1|, reported separately from the flow residual.
double mass_residual(const Vector& omega);

/**
 * Jacobian of θ ↦ ω_θ for per-(s,a) logits θ, shape (|S||A|) × (|S||A|).
 *
 * Column (s,b): Σ_a ω(s,a) (δ_ab − π(b|s)) M(· | s,a). The expectation over
 * ω carries no extra (1−γ) factor; finite differences pin this constant.
 */
struct OccupancyJacobian {
    Matrix matrix;
};

OccupancyJacobian occupancy_jacobian(const Cmp& cmp, const TabularPolicy& pi);
OccupancyJacobian occupancy_jacobian(const Cmp& cmp, const TabularPolicy& pi, const SuccessorRep& sr,
                                     const Vector& omega);

struct Advantage {
    Vector q;  ///< Q(s,a) = E[Σ_t γ^t r] from (s,a), state-action order (not (1−γ)-scaled).
    Vector v;  ///< V(s) = Σ_a π(a|s) Q(s,a).
    Vector a;  ///< A(s,a) = Q(s,a) − V(s).
};

/// Q = Mᵀ r, i.e. Q(s,a) = Σ_{s',a'} M(s',a'|s,a) r(s',a').
Advantage advantage_for_reward(const Cmp& cmp, const TabularPolicy& pi, const Vector& reward);
Advantage advantage_for_reward(const Cmp& cmp, const TabularPolicy& pi, const SuccessorRep& sr,
                               const Vector& reward);

/// Smallest H with γ^H ≤ bound (H = 1 for γ = 0).
int truncation_horizon(double gamma, double bound = 1e-8);

struct OccupancyEstimate {
    Vector mean;            ///< (1−γ)·mean over trajectories of Σ_t γ^t δ(s_t,a_t).
    Vector standard_error;  ///< per-entry standard error of the mean.
    int horizon = 0;
    double truncation_bias = 0.0;  ///< upper bound on the total mass lost to truncation, γ^H.
    std::int64_t env_steps = 0;
};

/// Single trajectory of (state, action) pairs of length `horizon`.
struct Trajectory {
    std::vector<int> states;
    std::vector<int> actions;
};

/// Deterministic rollout sampler driven by a single seeded std::mt19937_64 stream.
class RolloutSampler {
public:
    RolloutSampler(const Cmp& cmp, const TabularPolicy& pi, std::uint64_t seed);
    void rollout(int horizon, Trajectory& out);

private:
    int draw(const Eigen::Ref<const Eigen::RowVectorXd>& cdf);

    const Cmp& cmp_;
    Matrix policy_cdf_;  ///< row s: cumulative π(·|s)
    Matrix kernel_cdf_;  ///< row (s,a): cumulative P(·|s,a)
    Vector mu_cdf_;
    std::mt19937_64 engine_;
};

OccupancyEstimate sample_occupancy(const Cmp& cmp, const TabularPolicy& pi, int n_traj, int horizon,
                                   std::uint64_t seed);

struct ScalarEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
};

/// (1−γ)·E[Σ_t γ^t f(s_t,a_t)] by Monte Carlo, truncated at `horizon`.
ScalarEstimate discounted_expectation(const Cmp& cmp, const TabularPolicy& pi, const Vector& f, int n_traj,
                                      int horizon, std::uint64_t seed);

struct LinearSolution {
    double value = 0.0;        ///< ⟨r, ω*⟩, i.e. (1−γ) Σ μ(s) V*(s)
    std::vector<int> policy;   ///< greedy action per state, lowest index on ties
    Vector state_values;       ///< unnormalized V*(s)
    int iterations = 0;
};

/// Value iteration to sup-norm tolerance 1e-12 on the Bellman residual.
LinearSolution solve_linear_baseline(const Cmp& cmp, const Vector& reward);

/// Deterministic policy as a TabularPolicy with one-hot rows.
TabularPolicy deterministic_policy(const Cmp& cmp, const std::vector<int>& actions);

/// Writes `s,a,omega` rows with a header line.
void write_occupancy_csv(std::ostream& os, const Cmp& cmp, const Vector& omega);

}  // namespace nmdp
