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

#include "nmdp/occupancy.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>

namespace nmdp {

/// log2(e): nats → bits.
inline constexpr double kBitsPerNat = 1.4426950408889634;
/// Lower clamp for logarithms of occupancy entries.
inline constexpr double kLogFloor = 1e-300;

/// Emits a warning on stderr once per distinct key for the lifetime of the process.
void warn_once(const std::string& key, const std::string& message);

/// x log x with the 0·log 0 = 0 convention.
double xlogx(double x);

/**
 * Scalar differentiable functional of a mixture of occupancies.
 *
 * Values and differentials are in nats for entropic functionals (raw units for
 * linear ones); `to_report` converts a value to the reporting unit (bits for
 * entropic functionals). Differentials are defined up to flow-normal
 * directions; only their flow-tangent projection is meaningful.
 */
class UtilityFunctional {
public:
    virtual ~UtilityFunctional() = default;

    virtual std::string name() const = 0;
    /// 1 for single-occupancy functionals, 0 for functionals of the whole mixture.
    virtual int arity() const = 0;
    virtual bool entropic() const = 0;

    virtual double value(std::span<const Vector> omegas, const Vector& weights) const = 0;
    /// ∂f/∂ω_i: the intrinsic reward of mixture component `component`.
    virtual Vector differential(std::span<const Vector> omegas, const Vector& weights,
                                std::size_t component) const = 0;

    double to_report(double v) const { return entropic() ? v * kBitsPerNat : v; }
    double from_report(double v) const { return entropic() ? v / kBitsPerNat : v; }

    double value(const Vector& omega) const;
    Vector differential(const Vector& omega) const;
};

/**
 * Functional of a single occupancy. Applied to a mixture it reads the mixture
 * occupancy ω̄ = Σ z_i ω_i, so component i receives z_i ∇f(ω̄).
 */
class SingleOccupancyUtility : public UtilityFunctional {
public:
    int arity() const override { return 1; }
    double value(std::span<const Vector> omegas, const Vector& weights) const override;
    Vector differential(std::span<const Vector> omegas, const Vector& weights,
                        std::size_t component) const override;
    using UtilityFunctional::differential;
    using UtilityFunctional::value;

    virtual double evaluate(const Vector& omega) const = 0;
    virtual Vector gradient(const Vector& omega) const = 0;
    /// Ambient Hessian in ω. Every shipped single-occupancy functional provides one.
    virtual Matrix hessian(const Vector& omega) const = 0;
};

using UtilityPtr = std::shared_ptr<const UtilityFunctional>;
using SingleUtilityPtr = std::shared_ptr<const SingleOccupancyUtility>;

enum class EntropyMode { state_action, state };
enum class LabelSpace { state, state_action };

SingleUtilityPtr linear_utility(Vector reward);
SingleUtilityPtr entropy_utility(EntropyMode mode, int n_actions);
UtilityPtr mixture_mutual_information(LabelSpace label_space, int n_actions);
SingleUtilityPtr js_to_reference(const Occupancy& reference);

/// Mixture occupancy Σ z_i ω_i.
Vector mixture_occupancy(std::span<const Vector> omegas, const Vector& weights);

class LegendrePotential;

/// Σ_i z_i φ(ω_i) − φ(Σ_i z_i ω_i), in the potential's native units (nats for entropies).
double dispersion(const LegendrePotential& potential, std::span<const Vector> omegas, const Vector& weights);

/**
 * Convex constraint g(ω) = d(ω) − b ≤ 0 on one mixture component.
 * The threshold is given in reporting units (bits for entropic bases).
 */
class Constraint {
public:
    Constraint(SingleUtilityPtr base, double threshold, std::size_t component = 0);

    const SingleOccupancyUtility& base() const { return *base_; }
    const SingleUtilityPtr& base_ptr() const { return base_; }
    double threshold() const { return threshold_; }
    std::size_t component() const { return component_; }

    /// g in internal units (nats for entropic bases).
    double value(const Vector& omega) const;
    /// g in reporting units.
    double value_report(const Vector& omega) const;
    double slack(const Vector& omega) const { return -value(omega); }
    Vector differential(const Vector& omega) const;
    Matrix hessian(const Vector& omega) const;

private:
    SingleUtilityPtr base_;
    double threshold_;
    double threshold_internal_;
    std::size_t component_;
};

Constraint make_constraint(SingleUtilityPtr base, double threshold, std::size_t component = 0);

}  // namespace nmdp
