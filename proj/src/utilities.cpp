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

#include "nmdp/utilities.hpp"

#include "nmdp/geometry.hpp"

#include <cmath>
#include <iostream>
#include <mutex>
#include <set>

namespace nmdp {

void warn_once(const std::string& key, const std::string& message) {
    static std::mutex mutex;
    static std::set<std::string> seen;
    std::lock_guard<std::mutex> lock(mutex);
    if (seen.insert(key).second) std::cerr << "warning: " << message << '\n';
}

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

namespace {

double clamped_log(double x, const char* who) {
    if (x < kLogFloor) {
        warn_once(std::string("clamp:") + who,
                  std::string(who) + ": non-interior occupancy entry clamped to 1e-300 before taking the log");
        return std::log(kLogFloor);
    }
    return std::log(x);
}

Vector state_marginal(const Vector& omega, int n_actions) {
    const Eigen::Index ns = omega.size() / n_actions;
    Vector d(ns);
    for (Eigen::Index s = 0; s < ns; ++s) d(s) = omega.segment(s * n_actions, n_actions).sum();
    return d;
}

void check_weights(std::span<const Vector> omegas, const Vector& weights) {
    if (omegas.empty()) throw Error("utility evaluated on an empty mixture");
    if (weights.size() != static_cast<Eigen::Index>(omegas.size()))
        throw Error("mixture weights and occupancies differ in length");
    for (const auto& w : omegas)
        if (w.size() != omegas.front().size()) throw Error("mixture occupancies differ in dimension");
}

class LinearUtility final : public SingleOccupancyUtility {
public:
    explicit LinearUtility(Vector reward) : reward_(std::move(reward)) {
        if (!reward_.allFinite()) throw Error("linear utility reward must be finite");
    }
    std::string name() const override { return "linear"; }
    bool entropic() const override { return false; }
    double evaluate(const Vector& omega) const override {
        check(omega);
        return reward_.dot(omega);
    }
    Vector gradient(const Vector& omega) const override {
        check(omega);
        return reward_;
    }
    Matrix hessian(const Vector& omega) const override {
        check(omega);
        return Matrix::Zero(omega.size(), omega.size());
    }

private:
    void check(const Vector& omega) const {
        if (omega.size() != reward_.size()) throw Error("linear utility: dimension mismatch");
    }
    Vector reward_;
};

class EntropyUtility final : public SingleOccupancyUtility {
public:
    EntropyUtility(EntropyMode mode, int n_actions) : mode_(mode), n_actions_(n_actions) {
        if (n_actions <= 0) throw Error("entropy utility needs a positive action count");
    }
    std::string name() const override {
        return mode_ == EntropyMode::state_action ? "entropy_state_action" : "entropy_state";
    }
    bool entropic() const override { return true; }

    double evaluate(const Vector& omega) const override {
        const Vector p = marginal(omega);
        double h = 0.0;
        for (Eigen::Index i = 0; i < p.size(); ++i) h -= xlogx(p(i));
        return h;
    }
    Vector gradient(const Vector& omega) const override {
        const Vector p = marginal(omega);
        Vector g(omega.size());
        for (Eigen::Index x = 0; x < omega.size(); ++x) {
            const Eigen::Index i = mode_ == EntropyMode::state_action ? x : x / n_actions_;
            g(x) = -(clamped_log(p(i), "entropy") + 1.0);
        }
        return g;
    }
    Matrix hessian(const Vector& omega) const override {
        const Vector p = marginal(omega);
        Matrix h = Matrix::Zero(omega.size(), omega.size());
        for (Eigen::Index x = 0; x < omega.size(); ++x) {
            if (mode_ == EntropyMode::state_action) {
                h(x, x) = -1.0 / std::max(p(x), kLogFloor);
            } else {
                const Eigen::Index s = x / n_actions_;
                for (int b = 0; b < n_actions_; ++b) h(x, s * n_actions_ + b) = -1.0 / std::max(p(s), kLogFloor);
            }
        }
        return h;
    }

private:
    Vector marginal(const Vector& omega) const {
        if (omega.size() % n_actions_ != 0) throw Error("entropy utility: dimension mismatch");
        return mode_ == EntropyMode::state_action ? omega : state_marginal(omega, n_actions_);
    }
    EntropyMode mode_;
    int n_actions_;
};

class MixtureMutualInformation final : public UtilityFunctional {
public:
    MixtureMutualInformation(LabelSpace space, int n_actions) : space_(space), n_actions_(n_actions) {
        if (n_actions <= 0) throw Error("mutual information needs a positive action count");
    }
    std::string name() const override {
        return space_ == LabelSpace::state ? "mixture_mi_state" : "mixture_mi_state_action";
    }
    int arity() const override { return 0; }
    bool entropic() const override { return true; }

    double value(std::span<const Vector> omegas, const Vector& weights) const override {
        check_weights(omegas, weights);
        if (omegas.size() < 2) {
            warn_once("mi:degenerate", "mutual information of a single-component mixture is 0");
            return 0.0;
        }
        const auto p = marginals(omegas);
        const Vector pbar = mixture_occupancy(p, weights);
        double mi = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            for (Eigen::Index x = 0; x < pbar.size(); ++x) {
                if (p[i](x) > 0.0 && weights(static_cast<Eigen::Index>(i)) > 0.0)
                    mi += weights(static_cast<Eigen::Index>(i)) * p[i](x) * std::log(p[i](x) / pbar(x));
            }
        }
        return mi;
    }

    // ∂I/∂ω_i(x) = z_i [log p_i(x) − log p̄(x)] = z_i [log p(i|x) − log z_i]
    Vector differential(std::span<const Vector> omegas, const Vector& weights,
                        std::size_t component) const override {
        check_weights(omegas, weights);
        if (component >= omegas.size()) throw Error("mixture component out of range");
        const Eigen::Index dim = omegas.front().size();
        if (omegas.size() < 2) return Vector::Zero(dim);
        const auto p = marginals(omegas);
        const Vector pbar = mixture_occupancy(p, weights);
        const double z = weights(static_cast<Eigen::Index>(component));
        Vector g(dim);
        for (Eigen::Index x = 0; x < dim; ++x) {
            const Eigen::Index i = space_ == LabelSpace::state_action ? x : x / n_actions_;
            g(x) = z * (clamped_log(p[component](i), "mutual information") - clamped_log(pbar(i), "mutual information"));
        }
        return g;
    }

private:
    std::vector<Vector> marginals(std::span<const Vector> omegas) const {
        std::vector<Vector> out;
        out.reserve(omegas.size());
        for (const auto& w : omegas) {
            if (w.size() % n_actions_ != 0) throw Error("mutual information: dimension mismatch");
            out.push_back(space_ == LabelSpace::state_action ? w : state_marginal(w, n_actions_));
        }
        return out;
    }
    LabelSpace space_;
    int n_actions_;
};

class JensenShannonToReference final : public SingleOccupancyUtility {
public:
    explicit JensenShannonToReference(Vector reference) : reference_(std::move(reference)) {}
    std::string name() const override { return "js_to_reference"; }
    bool entropic() const override { return true; }

    double evaluate(const Vector& omega) const override {
        check(omega);
        double js = 0.0;
        for (Eigen::Index x = 0; x < omega.size(); ++x) {
            const double m = 0.5 * (omega(x) + reference_(x));
            if (omega(x) > 0.0) js += 0.5 * omega(x) * std::log(omega(x) / m);
            if (reference_(x) > 0.0) js += 0.5 * reference_(x) * std::log(reference_(x) / m);
        }
        return js;
    }
    Vector gradient(const Vector& omega) const override {
        check(omega);
        Vector g(omega.size());
        for (Eigen::Index x = 0; x < omega.size(); ++x) {
            const double w = std::max(omega(x), kLogFloor);
            const double m = 0.5 * (w + reference_(x));
            g(x) = 0.5 * std::log(w / m);
        }
        return g;
    }
    Matrix hessian(const Vector& omega) const override {
        check(omega);
        Matrix h = Matrix::Zero(omega.size(), omega.size());
        for (Eigen::Index x = 0; x < omega.size(); ++x) {
            const double w = std::max(omega(x), kLogFloor);
            h(x, x) = 0.5 * reference_(x) / (w * (w + reference_(x)));
        }
        return h;
    }

private:
    void check(const Vector& omega) const {
        if (omega.size() != reference_.size()) throw Error("js_to_reference: dimension mismatch");
    }
    Vector reference_;
};

}  // namespace

double UtilityFunctional::value(const Vector& omega) const {
    const Vector one = Vector::Ones(1);
    return value(std::span<const Vector>(&omega, 1), one);
}

Vector UtilityFunctional::differential(const Vector& omega) const {
    const Vector one = Vector::Ones(1);
    return differential(std::span<const Vector>(&omega, 1), one, 0);
}

double SingleOccupancyUtility::value(std::span<const Vector> omegas, const Vector& weights) const {
    check_weights(omegas, weights);
    return evaluate(omegas.size() == 1 ? omegas.front() : mixture_occupancy(omegas, weights));
}

Vector SingleOccupancyUtility::differential(std::span<const Vector> omegas, const Vector& weights,
                                            std::size_t component) const {
    check_weights(omegas, weights);
    if (component >= omegas.size()) throw Error("mixture component out of range");
    if (omegas.size() == 1) return gradient(omegas.front());
    return weights(static_cast<Eigen::Index>(component)) * gradient(mixture_occupancy(omegas, weights));
}

SingleUtilityPtr linear_utility(Vector reward) { return std::make_shared<LinearUtility>(std::move(reward)); }

SingleUtilityPtr entropy_utility(EntropyMode mode, int n_actions) {
    return std::make_shared<EntropyUtility>(mode, n_actions);
}

UtilityPtr mixture_mutual_information(LabelSpace label_space, int n_actions) {
    return std::make_shared<MixtureMutualInformation>(label_space, n_actions);
}

SingleUtilityPtr js_to_reference(const Occupancy& reference) {
    return std::make_shared<JensenShannonToReference>(reference.values());
}

Vector mixture_occupancy(std::span<const Vector> omegas, const Vector& weights) {
    check_weights(omegas, weights);
    Vector out = Vector::Zero(omegas.front().size());
    for (std::size_t i = 0; i < omegas.size(); ++i) out += weights(static_cast<Eigen::Index>(i)) * omegas[i];
    return out;
}

double dispersion(const LegendrePotential& potential, std::span<const Vector> omegas, const Vector& weights) {
    check_weights(omegas, weights);
    if (auto msg = check_distribution(weights, kStochasticTol); !msg.empty()) throw Error("mixture weights " + msg);
    double avg = 0.0;
    for (std::size_t i = 0; i < omegas.size(); ++i)
        avg += weights(static_cast<Eigen::Index>(i)) * potential.value(omegas[i]);
    return avg - potential.value(mixture_occupancy(omegas, weights));
}

Constraint::Constraint(SingleUtilityPtr base, double threshold, std::size_t component)
    : base_(std::move(base)), threshold_(threshold), component_(component) {
    if (!base_) throw Error("constraint needs a base functional");
    if (!std::isfinite(threshold)) throw Error("constraint threshold must be finite");
    threshold_internal_ = base_->from_report(threshold);
}

double Constraint::value(const Vector& omega) const { return base_->evaluate(omega) - threshold_internal_; }

double Constraint::value_report(const Vector& omega) const { return base_->to_report(value(omega)); }

Vector Constraint::differential(const Vector& omega) const { return base_->gradient(omega); }

Matrix Constraint::hessian(const Vector& omega) const { return base_->hessian(omega); }

Constraint make_constraint(SingleUtilityPtr base, double threshold, std::size_t component) {
    return Constraint(std::move(base), threshold, component);
}

}  // namespace nmdp
