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

#include <Eigen/Dense>
#include <json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace nmdp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a function or potential is evaluated outside its domain.
class DomainError : public Error {
public:
    using Error::Error;
};

inline constexpr double kStochasticTol = 1e-12;

/**
 * A finite controlled Markov process.
 *
 * State-action pairs are flattened as `s * n_actions + a` everywhere in the
 * library. The kernel is stored with one row per state-action pair and one
 * column per successor state, so `kernel(s * A + a, s')` is P(s'|s,a).
 */
class Cmp {
public:
    Cmp(int n_states, int n_actions, Matrix kernel, Vector mu, double gamma);

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    int n_pairs() const { return n_states_ * n_actions_; }
    int index(int s, int a) const { return s * n_actions_ + a; }

    const Matrix& kernel() const { return kernel_; }
    const Vector& mu() const { return mu_; }
    double gamma() const { return gamma_; }

    double transition(int s, int a, int next) const { return kernel_(index(s, a), next); }

    /// Flow matrix B with B(s, (s',a')) = δ(s,s') − γ P(s|s',a'); Bω = (1−γ)μ on Ω.
    Matrix flow_matrix() const;

    nlohmann::json to_json() const;
    static Cmp from_json(const nlohmann::json& j);

private:
    int n_states_;
    int n_actions_;
    Matrix kernel_;
    Vector mu_;
    double gamma_;
};

/// Lists every violated invariant of the raw CMP data; empty means valid.
std::vector<std::string> validate_cmp(int n_states, int n_actions, const Matrix& kernel,
                                      const Vector& mu, double gamma);
std::vector<std::string> validate_cmp(const Cmp& cmp);

/// Stochastic tabular policy with per-state softmax over logits.
class TabularPolicy {
public:
    TabularPolicy() = default;

    static TabularPolicy from_logits(const Matrix& logits);
    /// Rows must be distributions. Zero entries are allowed (deterministic policies).
    static TabularPolicy from_probs(const Matrix& probs);
    static TabularPolicy uniform(int n_states, int n_actions);

    int n_states() const { return static_cast<int>(probs_.rows()); }
    int n_actions() const { return static_cast<int>(probs_.cols()); }

    const Matrix& logits() const { return logits_; }
    const Matrix& probs() const { return probs_; }
    double prob(int s, int a) const { return probs_(s, a); }
    bool interior() const { return (probs_.array() > 0.0).all(); }

    /// Probabilities flattened in state-action order.
    Vector flat_probs() const;

private:
    Matrix logits_;
    Matrix probs_;
};

/// Convenience wrapper around TabularPolicy::from_logits.
TabularPolicy policy_from_logits(const Matrix& logits);

class PolicyMixture {
public:
    PolicyMixture(std::vector<TabularPolicy> components, Vector weights);
    /// Uniform label weights.
    explicit PolicyMixture(std::vector<TabularPolicy> components);

    std::size_t size() const { return components_.size(); }
    const TabularPolicy& component(std::size_t i) const { return components_.at(i); }
    const std::vector<TabularPolicy>& components() const { return components_; }
    const Vector& weights() const { return weights_; }

private:
    std::vector<TabularPolicy> components_;
    Vector weights_;
};

/// π(a|s) = ω(s,a) / Σ_a' ω(s,a'). Throws if some state has zero marginal.
TabularPolicy condition_occupancy(const Cmp& cmp, const Vector& omega);

/// Checks that `v` is a probability vector within `tol`; returns a description or "".
std::string check_distribution(const Vector& v, double tol);

}  // namespace nmdp
