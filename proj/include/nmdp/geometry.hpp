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

#include "nmdp/utilities.hpp"

#include <memory>
#include <string>
#include <vector>

namespace nmdp {

/// Convex potential on (a subset of) the occupancy simplex, in nats.
class LegendrePotential {
public:
    virtual ~LegendrePotential() = default;

    virtual std::string name() const = 0;
    /// True when ω lies in the open domain where gradient and Hessian exist.
    virtual bool in_domain(const Vector& omega) const = 0;
    /// May return +∞ outside the domain (barrier potentials); never throws for shape-valid input.
    virtual double value(const Vector& omega) const = 0;
    /// Throws DomainError outside the domain.
    virtual Vector gradient(const Vector& omega) const = 0;
    /// Ambient Hessian; throws DomainError outside the domain.
    virtual Matrix hessian(const Vector& omega) const = 0;
    /// Jᵀ ∇²φ(ω) J for the occupancy Jacobian J of a softmax policy. Overrides use closed forms
    /// that stay accurate when entries of ω approach zero.
    virtual Matrix pulled_back_hessian(const Matrix& jac, const Vector& omega) const;
};

using PotentialPtr = std::shared_ptr<const LegendrePotential>;

enum class PotentialKind { kakade, fisher_rao, barrier };
enum class BarrierKind { neg_log, entropic };

/// Negative joint entropy Σ ω log ω. Its Bregman divergence is KL.
PotentialPtr fisher_rao_potential();
/// Negative conditional entropy Σ ω(s,a) log π_ω(a|s).
PotentialPtr kakade_potential(int n_actions);
/// b(ω) = φ(ω) + β Σ_i ℓ(−g_i(ω)); +∞ unless every g_i(ω) < 0.
PotentialPtr barrier_potential(PotentialPtr base, std::vector<Constraint> constraints, double beta, BarrierKind ell);

struct PotentialParams {
    PotentialKind kind = PotentialKind::kakade;
    int n_actions = 1;
    // barrier only
    PotentialKind base = PotentialKind::kakade;
    std::vector<Constraint> constraints;
    double beta = 1.0;
    BarrierKind ell = BarrierKind::neg_log;
};

PotentialPtr potential(const PotentialParams& params);

/// ℓ and its first two derivatives on slack x > 0.
double barrier_ell(BarrierKind kind, double x);
double barrier_ell_d1(BarrierKind kind, double x);
double barrier_ell_d2(BarrierKind kind, double x);

/// D_φ(ω‖ω_ref) = φ(ω) − φ(ω_ref) − ⟨∇φ(ω_ref), ω − ω_ref⟩.
double bregman_divergence(const LegendrePotential& phi, const Vector& omega, const Vector& omega_ref);

struct HessianMetric {
    Matrix matrix;
    std::string provenance;
};

/// G = Jᵀ H_φ(ω) J, symmetrized, for the logit parameterization of π.
HessianMetric hessian_metric(const Cmp& cmp, const TabularPolicy& pi, const LegendrePotential& phi);
HessianMetric hessian_metric(const OccupancyJacobian& jac, const Vector& omega, const LegendrePotential& phi);

/**
 * Expected KL plus the Bregman divergence of ℓ at the cost budget:
 * KL̄ + β (ℓ(B − 𝔸) − ℓ(B) + ℓ'(B) 𝔸).
 * Throws DomainError when the budget is exhausted (B ≤ 0 or B − 𝔸 ≤ 0).
 */
double ctrpo_divergence(double surrogate_cost_advantage, double budget, double expected_kl, double beta,
                        BarrierKind ell);

std::string to_string(PotentialKind kind);
std::string to_string(BarrierKind kind);
PotentialKind parse_potential_kind(const std::string& s);
BarrierKind parse_barrier_kind(const std::string& s);

}  // namespace nmdp
