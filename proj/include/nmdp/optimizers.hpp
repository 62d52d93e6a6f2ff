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

#include "nmdp/geometry.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace nmdp {

enum class OptimizerKind { vpg, hpg, proximal };
enum class GradientMode { exact, sampled };

std::string to_string(OptimizerKind kind);
std::string to_string(GradientMode mode);
OptimizerKind parse_optimizer_kind(const std::string& s);
GradientMode parse_gradient_mode(const std::string& s);

/// Logit matrix (S × A) flattened in state-action order, and back.
Vector flatten(const Matrix& logits);
Matrix unflatten(const Vector& flat, int n_states, int n_actions);

struct SamplingSpec {
    int n_traj = 1000;
    int horizon = 0;  ///< 0: smallest H with γ^H ≤ 1e-8
    std::uint64_t seed = 0;
};

struct UtilityGradient {
    std::vector<Vector> components;  ///< ∇_θi f, flattened like the logits
    std::int64_t env_steps = 0;

    double norm() const;
};

/**
 * ∇_θ f for every mixture component via the intrinsic reward r_i = ∂f/∂ω_i:
 * ∇_θi f = E_{(s,a)∼ω_i}[∇ log π_i(a|s) A_i(s,a)], which in logit coordinates is ω_i ⊙ A_i.
 * Sampled mode estimates both ω_i and the advantage-weighted scores from rollouts.
 */
UtilityGradient utility_gradient(const Cmp& cmp, const PolicyMixture& mixture, const UtilityFunctional& f,
                                 GradientMode mode = GradientMode::exact, const SamplingSpec& sampling = {});

/// Policy gradient of ⟨r, ω⟩ at π (logit coordinates), given precomputed SR and ω.
Vector reward_gradient(const Cmp& cmp, const TabularPolicy& pi, const SuccessorRep& sr, const Vector& omega,
                       const Vector& reward);

/// Σ_s d(s) F_s with F_s = diag π(·|s) − π(·|s) π(·|s)ᵀ, assembled per state block.
Matrix state_weighted_fisher(const Cmp& cmp, const TabularPolicy& pi, const Vector& state_occupancy);

struct Problem {
    Cmp cmp;
    UtilityPtr utility;
    std::vector<Constraint> constraints;
    Vector weights;  ///< mixture label weights z

    std::size_t n_components() const { return static_cast<std::size_t>(weights.size()); }
};

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::hpg;
    int iterations = 100;
    double step_size = 0.05;       ///< η_θ; also the surrogate's η for the proximal optimizer
    double dual_step_size = 0.1;   ///< η_λ (vpg)
    GradientMode mode = GradientMode::exact;
    SamplingSpec sampling;
    double tol = 1e-10;            ///< stop once the gradient norm drops to this
    PotentialKind potential = PotentialKind::kakade;
    bool identity_metric = false;  ///< G = I, i.e. a plain gradient step (hpg)
    BarrierKind ell = BarrierKind::neg_log;
    double beta = 1.0;
    double damping = 1e-8;         ///< ε = damping · trace(G) / dim
    int max_halvings = 30;
    int inner_steps = 10;          ///< proximal inner loop length
    double inner_lr = 1.0;
    bool record_wall_time = false;
};

struct OptimizerState {
    std::vector<Matrix> thetas;
    Vector multipliers;  ///< λ_i ≥ 0, one per constraint (vpg)
    double step_size = 0.05;
    int iteration = 0;
    std::int64_t env_steps = 0;

    // metrics of the current iterate
    double utility = 0.0;
    std::vector<double> constraint_values;  ///< internal units
    double grad_norm = 0.0;
    double flow_residual = 0.0;
    int last_halvings = 0;
    bool last_step_accepted = true;
};

/// Policies, occupancies and metrics of a parameter vector.
struct Evaluation {
    std::vector<TabularPolicy> policies;
    std::vector<SuccessorRep> srs;
    std::vector<Vector> omegas;
    double utility = 0.0;
    std::vector<double> constraint_values;
    double flow_residual = 0.0;

    PolicyMixture mixture(const Vector& weights) const { return PolicyMixture(policies, weights); }
};

Evaluation evaluate(const Problem& problem, const std::vector<Matrix>& thetas);

/// Fresh state at `thetas` with metrics filled in; λ = 0.
OptimizerState initial_state(const Problem& problem, std::vector<Matrix> thetas, const OptimizerConfig& config);

OptimizerState vpg_lagrangian_step(const OptimizerState& state, const Problem& problem, const OptimizerConfig& config);
OptimizerState hpg_step(const OptimizerState& state, const Problem& problem, const OptimizerConfig& config);
OptimizerState proximal_surrogate_step(const OptimizerState& state, const Problem& problem,
                                       const OptimizerConfig& config);

/// HPG ascent direction for one component: (G + εI)^† ∇f with G from `phi`.
Vector hpg_direction(const Cmp& cmp, const TabularPolicy& pi, const SuccessorRep& sr, const Vector& omega,
                     const LegendrePotential& phi, const Vector& gradient, double damping);

struct EquivalenceReport {
    double gradient_gap = 0.0;      ///< ‖∇J_PMD − ∇J_SURR‖∞ at θ_k
    double pmd_hessian_gap = 0.0;   ///< ‖Jᵀ H_K J − F‖∞
    double surr_hessian_gap = 0.0;  ///< ‖∇²E KL(π_k‖π_θ) − F‖∞ (finite differences)
    bool passed = false;
};

/// First-order comparison of the mirror-descent and surrogate objectives under the kakade potential.
EquivalenceReport surrogate_equivalence_check(const Cmp& cmp, const TabularPolicy& pi_k, const UtilityFunctional& f);

struct RunRecord {
    int iter = 0;
    double utility_bits = 0.0;
    std::vector<double> constraint_bits;
    std::vector<double> multipliers;
    double grad_norm = 0.0;
    double flow_residual = 0.0;
    std::int64_t env_steps = 0;
    double wall_ms = 0.0;
};

struct RunLog {
    std::string optimizer;
    std::string fingerprint;
    std::uint64_t seed = 0;
    std::size_t n_constraints = 0;
    GradientMode mode = GradientMode::exact;
    std::vector<RunRecord> records;
    std::vector<Matrix> final_thetas;

    /// `iter,utility_bits,constraint_0_bits,...,multiplier_0,...,grad_norm,flow_residual,env_steps,wall_ms`
    void write_csv(std::ostream& os) const;
};

/// Runs the configured optimizer for `iterations` steps or until the gradient norm reaches `tol`.
RunLog run_optimization(const Problem& problem, std::vector<Matrix> initial_thetas, const OptimizerConfig& config);

/// Shortest round-trip decimal representation used by every CSV writer.
std::string format_double(double v);

}  // namespace nmdp
