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

#include "nmdp/geometry.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace nmdp {

Matrix LegendrePotential::pulled_back_hessian(const Matrix& jac, const Vector& omega) const {
    return jac.transpose() * hessian(omega) * jac;
}

namespace {

void require_interior(const Vector& omega, const char* who) {
    for (Eigen::Index i = 0; i < omega.size(); ++i) {
        if (!(omega(i) > 0.0)) {
            std::ostringstream os;
            os << who << ": entry " << i << " = " << omega(i) << " is not interior";
            throw DomainError(os.str());
        }
    }
}

class FisherRaoPotential final : public LegendrePotential {
public:
    std::string name() const override { return "fisher_rao"; }
    bool in_domain(const Vector& omega) const override { return (omega.array() > 0.0).all(); }
    double value(const Vector& omega) const override {
        if ((omega.array() < 0.0).any()) throw DomainError("fisher_rao: negative entry");
        double v = 0.0;
        for (Eigen::Index i = 0; i < omega.size(); ++i) v += xlogx(omega(i));
        return v;
    }
    Vector gradient(const Vector& omega) const override {
        require_interior(omega, "fisher_rao gradient");
        return (omega.array().log() + 1.0).matrix();
    }
    Matrix hessian(const Vector& omega) const override {
        require_interior(omega, "fisher_rao hessian");
        return omega.cwiseInverse().asDiagonal();
    }
};

class KakadePotential final : public LegendrePotential {
public:
    explicit KakadePotential(int n_actions) : n_actions_(n_actions) {
        if (n_actions <= 0) throw Error("kakade potential needs a positive action count");
    }
    std::string name() const override { return "kakade"; }
    bool in_domain(const Vector& omega) const override {
        return omega.size() % n_actions_ == 0 && (omega.array() > 0.0).all();
    }
    double value(const Vector& omega) const override {
        check(omega);
        if ((omega.array() < 0.0).any()) throw DomainError("kakade: negative entry");
        double v = 0.0;
        for (Eigen::Index s = 0; s < omega.size() / n_actions_; ++s) {
            const auto block = omega.segment(s * n_actions_, n_actions_);
            const double d = block.sum();
            for (int a = 0; a < n_actions_; ++a)
                if (block(a) > 0.0) v += block(a) * std::log(block(a) / d);
        }
        return v;
    }
    // ∂φ/∂ω(s,a) = log π(a|s)
    Vector gradient(const Vector& omega) const override {
        check(omega);
        require_interior(omega, "kakade gradient");
        Vector g(omega.size());
        for (Eigen::Index s = 0; s < omega.size() / n_actions_; ++s) {
            const double d = omega.segment(s * n_actions_, n_actions_).sum();
            for (int a = 0; a < n_actions_; ++a) g(s * n_actions_ + a) = std::log(omega(s * n_actions_ + a) / d);
        }
        return g;
    }
    // Block diagonal: δ_aa'/ω(s,a) − 1/d(s).
    Matrix hessian(const Vector& omega) const override {
        check(omega);
        require_interior(omega, "kakade hessian");
        Matrix h = Matrix::Zero(omega.size(), omega.size());
        for (Eigen::Index s = 0; s < omega.size() / n_actions_; ++s) {
            const Eigen::Index o = s * n_actions_;
            const double d = omega.segment(o, n_actions_).sum();
            h.block(o, o, n_actions_, n_actions_).setConstant(-1.0 / d);
            for (int a = 0; a < n_actions_; ++a) h(o + a, o + a) += 1.0 / omega(o + a);
        }
        return h;
    }
    // Equals Σ_s d(s)(diag π_s − π_s π_sᵀ) = diag ω(s,·) − ω(s,·)ω(s,·)ᵀ/d(s); independent of J
    // because the softmax Jacobian cancels, and free of the 1/ω terms of the ambient Hessian.
    Matrix pulled_back_hessian(const Matrix& jac, const Vector& omega) const override {
        check(omega);
        if (jac.rows() != omega.size() || jac.cols() != omega.size())
            throw Error("kakade metric: jacobian shape mismatch");
        if ((omega.array() < 0.0).any()) throw DomainError("kakade metric: negative entry");
        Matrix g = Matrix::Zero(omega.size(), omega.size());
        for (Eigen::Index s = 0; s < omega.size() / n_actions_; ++s) {
            const Eigen::Index o = s * n_actions_;
            const auto block = omega.segment(o, n_actions_);
            const double d = block.sum();
            if (!(d > 0.0)) continue;
            g.block(o, o, n_actions_, n_actions_) = -block * block.transpose() / d;
            // ω_a(d − ω_a)/d with d − ω_a summed from the other entries, exact for a dominant action
            for (int a = 0; a < n_actions_; ++a) {
                double rest = 0.0;
                for (int b = 0; b < n_actions_; ++b)
                    if (b != a) rest += block(b);
                g(o + a, o + a) = block(a) * rest / d;
            }
        }
        return g;
    }

private:
    void check(const Vector& omega) const {
        if (omega.size() % n_actions_ != 0) throw Error("kakade: dimension is not a multiple of n_actions");
    }
    int n_actions_;
};

class BarrierPotential final : public LegendrePotential {
public:
    BarrierPotential(PotentialPtr base, std::vector<Constraint> constraints, double beta, BarrierKind ell)
        : base_(std::move(base)), constraints_(std::move(constraints)), beta_(beta), ell_(ell) {
        if (!base_) throw Error("barrier potential needs a base potential");
        if (!(beta_ > 0.0)) throw Error("barrier potential needs beta > 0");
    }
    std::string name() const override { return "barrier(" + base_->name() + ")"; }

    bool in_domain(const Vector& omega) const override {
        if (!base_->in_domain(omega)) return false;
        for (const auto& c : constraints_)
            if (!(c.value(omega) < 0.0)) return false;
        return true;
    }
    double value(const Vector& omega) const override {
        double v = base_->value(omega);
        for (const auto& c : constraints_) {
            const double slack = c.slack(omega);
            if (!(slack > 0.0)) return std::numeric_limits<double>::infinity();
            v += beta_ * barrier_ell(ell_, slack);
        }
        return v;
    }
    // d/dω ℓ(−g) = −ℓ'(x) ∇g
    Vector gradient(const Vector& omega) const override {
        Vector g = base_->gradient(omega);
        for (const auto& c : constraints_) {
            const double x = feasible_slack(c, omega);
            g -= beta_ * barrier_ell_d1(ell_, x) * c.differential(omega);
        }
        return g;
    }
    // d²/dω² ℓ(−g) = ℓ''(x) ∇g ∇gᵀ − ℓ'(x) ∇²g
    Matrix hessian(const Vector& omega) const override {
        Matrix h = base_->hessian(omega);
        for (const auto& c : constraints_) {
            const double x = feasible_slack(c, omega);
            const Vector dg = c.differential(omega);
            h += beta_ * (barrier_ell_d2(ell_, x) * dg * dg.transpose() - barrier_ell_d1(ell_, x) * c.hessian(omega));
        }
        return h;
    }
    Matrix pulled_back_hessian(const Matrix& jac, const Vector& omega) const override {
        Matrix g = base_->pulled_back_hessian(jac, omega);
        for (const auto& c : constraints_) {
            const double x = feasible_slack(c, omega);
            const Vector jdg = jac.transpose() * c.differential(omega);
            g += beta_ * (barrier_ell_d2(ell_, x) * jdg * jdg.transpose() -
                          barrier_ell_d1(ell_, x) * jac.transpose() * c.hessian(omega) * jac);
        }
        return g;
    }

private:
    static double feasible_slack(const Constraint& c, const Vector& omega) {
        const double x = c.slack(omega);
        if (!(x > 0.0)) {
            std::ostringstream os;
            os << "barrier: constraint " << c.base().name() << " is not strictly feasible (g = " << -x << ")";
            throw DomainError(os.str());
        }
        return x;
    }
    PotentialPtr base_;
    std::vector<Constraint> constraints_;
    double beta_;
    BarrierKind ell_;
};

}  // namespace

PotentialPtr fisher_rao_potential() { return std::make_shared<FisherRaoPotential>(); }

PotentialPtr kakade_potential(int n_actions) { return std::make_shared<KakadePotential>(n_actions); }

PotentialPtr barrier_potential(PotentialPtr base, std::vector<Constraint> constraints, double beta,
                               BarrierKind ell) {
    return std::make_shared<BarrierPotential>(std::move(base), std::move(constraints), beta, ell);
}

PotentialPtr potential(const PotentialParams& params) {
    switch (params.kind) {
        case PotentialKind::fisher_rao:
            return fisher_rao_potential();
        case PotentialKind::kakade:
            return kakade_potential(params.n_actions);
        case PotentialKind::barrier: {
            if (params.base == PotentialKind::barrier) throw Error("barrier base must be kakade or fisher_rao");
            PotentialParams base = params;
            base.kind = params.base;
            return barrier_potential(potential(base), params.constraints, params.beta, params.ell);
        }
    }
    throw Error("unknown potential kind");
}

double barrier_ell(BarrierKind kind, double x) {
    if (!(x > 0.0)) return std::numeric_limits<double>::infinity();
    return kind == BarrierKind::neg_log ? -std::log(x) : x * std::log(x);
}

double barrier_ell_d1(BarrierKind kind, double x) {
    if (!(x > 0.0)) throw DomainError("barrier derivative at nonpositive slack");
    return kind == BarrierKind::neg_log ? -1.0 / x : std::log(x) + 1.0;
}

double barrier_ell_d2(BarrierKind kind, double x) {
    if (!(x > 0.0)) throw DomainError("barrier derivative at nonpositive slack");
    return kind == BarrierKind::neg_log ? 1.0 / (x * x) : 1.0 / x;
}

double bregman_divergence(const LegendrePotential& phi, const Vector& omega, const Vector& omega_ref) {
    if (omega.size() != omega_ref.size()) throw Error("bregman_divergence: dimension mismatch");
    if (!phi.in_domain(omega_ref)) throw DomainError("bregman_divergence: reference point outside the domain");
    const double v = phi.value(omega);
    if (std::isinf(v)) throw DomainError("bregman_divergence: point outside the domain");
    return v - phi.value(omega_ref) - phi.gradient(omega_ref).dot(omega - omega_ref);
}

HessianMetric hessian_metric(const OccupancyJacobian& jac, const Vector& omega, const LegendrePotential& phi) {
    Matrix g = phi.pulled_back_hessian(jac.matrix, omega);
    g = 0.5 * (g + g.transpose()).eval();
    return {std::move(g), phi.name()};
}

HessianMetric hessian_metric(const Cmp& cmp, const TabularPolicy& pi, const LegendrePotential& phi) {
    const SuccessorRep sr = successor_representation(cmp, pi);
    const Vector omega = occupancy_via_successor(cmp, pi, sr);
    HessianMetric m = hessian_metric(occupancy_jacobian(cmp, pi, sr, omega), omega, phi);
    m.provenance += " at policy with " + std::to_string(cmp.n_states()) + "x" + std::to_string(cmp.n_actions()) + " logits";
    return m;
}

double ctrpo_divergence(double surrogate_cost_advantage, double budget, double expected_kl, double beta,
                        BarrierKind ell) {
    if (!(budget > 0.0)) throw DomainError("ctrpo_divergence: budget exhausted (B <= 0)");
    const double remaining = budget - surrogate_cost_advantage;
    if (!(remaining > 0.0)) throw DomainError("ctrpo_divergence: infeasible step (B - A <= 0)");
    if (beta == 0.0 || surrogate_cost_advantage == 0.0) return expected_kl;
    return expected_kl + beta * (barrier_ell(ell, remaining) - barrier_ell(ell, budget) +
                                 barrier_ell_d1(ell, budget) * surrogate_cost_advantage);
}

std::string to_string(PotentialKind kind) {
    switch (kind) {
        case PotentialKind::kakade: return "kakade";
        case PotentialKind::fisher_rao: return "fisher_rao";
        case PotentialKind::barrier: return "barrier";
    }
    return "?";
}

std::string to_string(BarrierKind kind) { return kind == BarrierKind::neg_log ? "neg_log" : "entropic"; }

PotentialKind parse_potential_kind(const std::string& s) {
    if (s == "kakade") return PotentialKind::kakade;
    if (s == "fisher_rao") return PotentialKind::fisher_rao;
    if (s == "barrier") return PotentialKind::barrier;
    throw Error("unknown potential '" + s + "' (expected kakade, fisher_rao or barrier)");
}

BarrierKind parse_barrier_kind(const std::string& s) {
    if (s == "neg_log") return BarrierKind::neg_log;
    if (s == "entropic") return BarrierKind::entropic;
    throw Error("unknown barrier ell '" + s + "' (expected neg_log or entropic)");
}

}  // namespace nmdp
