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

#include "nmdp/cmp.hpp"

#include <cmath>
#include <sstream>

namespace nmdp {

namespace {

std::string fmt_double(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
        if (!out.empty()) out += "; ";
        out += s;
    }
    return out;
}

}  // namespace

std::vector<std::string> validate_cmp(int n_states, int n_actions, const Matrix& kernel,
                                      const Vector& mu, double gamma) {
    std::vector<std::string> issues;
    if (n_states <= 0) issues.push_back("n_states must be positive");
    if (n_actions <= 0) issues.push_back("n_actions must be positive");
    if (!issues.empty()) return issues;

    if (kernel.rows() != n_states * n_actions || kernel.cols() != n_states) {
        issues.push_back("kernel must have shape (" + std::to_string(n_states * n_actions) + ", " +
                         std::to_string(n_states) + ")");
    } else {
        for (int s = 0; s < n_states; ++s) {
            for (int a = 0; a < n_actions; ++a) {
                const auto row = kernel.row(s * n_actions + a);
                const std::string tag = "(s=" + std::to_string(s) + ",a=" + std::to_string(a) + ")";
                if (!row.allFinite()) {
                    issues.push_back("row " + tag + " has non-finite entries");
                    continue;
                }
                if ((row.array() < 0.0).any()) issues.push_back("row " + tag + " has negative entries");
                const double sum = row.sum();
                if (std::abs(sum - 1.0) > kStochasticTol)
                    issues.push_back("row " + tag + " sums to " + fmt_double(sum));
            }
        }
    }
    if (mu.size() != n_states) {
        issues.push_back("mu must have length " + std::to_string(n_states));
    } else if (auto msg = check_distribution(mu, kStochasticTol); !msg.empty()) {
        issues.push_back("mu " + msg);
    }
    if (!(gamma >= 0.0)) issues.push_back("gamma must be >= 0");
    if (!(gamma < 1.0)) issues.push_back("gamma must be < 1");
    return issues;
}

std::vector<std::string> validate_cmp(const Cmp& cmp) {
    return validate_cmp(cmp.n_states(), cmp.n_actions(), cmp.kernel(), cmp.mu(), cmp.gamma());
}

std::string check_distribution(const Vector& v, double tol) {
    if (!v.allFinite()) return "has non-finite entries";
    if ((v.array() < 0.0).any()) return "has negative entries";
    const double sum = v.sum();
    if (std::abs(sum - 1.0) > tol) return "sums to " + fmt_double(sum);
    return {};
}

Cmp::Cmp(int n_states, int n_actions, Matrix kernel, Vector mu, double gamma)
    : n_states_(n_states), n_actions_(n_actions), kernel_(std::move(kernel)), mu_(std::move(mu)),
      gamma_(gamma) {
    const auto issues = validate_cmp(n_states_, n_actions_, kernel_, mu_, gamma_);
    if (!issues.empty()) throw Error("invalid CMP: " + join(issues));
}

Matrix Cmp::flow_matrix() const {
    Matrix b = Matrix::Zero(n_states_, n_pairs());
    for (int sp = 0; sp < n_states_; ++sp) {
        for (int ap = 0; ap < n_actions_; ++ap) {
            const int col = index(sp, ap);
            b(sp, col) += 1.0;
            for (int s = 0; s < n_states_; ++s) b(s, col) -= gamma_ * kernel_(col, s);
        }
    }
    return b;
}

nlohmann::json Cmp::to_json() const {
    nlohmann::json kernel = nlohmann::json::array();
    for (int s = 0; s < n_states_; ++s) {
        nlohmann::json per_action = nlohmann::json::array();
        for (int a = 0; a < n_actions_; ++a) {
            std::vector<double> row(n_states_);
            for (int sp = 0; sp < n_states_; ++sp) row[sp] = kernel_(index(s, a), sp);
            per_action.push_back(row);
        }
        kernel.push_back(per_action);
    }
    return {{"n_states", n_states_},
            {"n_actions", n_actions_},
            {"kernel", kernel},
            {"mu", std::vector<double>(mu_.data(), mu_.data() + mu_.size())},
            {"gamma", gamma_}};
}

// kernel is nested as kernel[s][a][s'].
Cmp Cmp::from_json(const nlohmann::json& j) {
    try {
        const int ns = j.at("n_states").get<int>();
        const int na = j.at("n_actions").get<int>();
        if (ns <= 0 || na <= 0) throw Error("n_states and n_actions must be positive");
        const auto& kj = j.at("kernel");
        if (!kj.is_array() || static_cast<int>(kj.size()) != ns)
            throw Error("kernel must be a nested array of shape [n_states][n_actions][n_states]");
        Matrix kernel(ns * na, ns);
        for (int s = 0; s < ns; ++s) {
            if (static_cast<int>(kj[s].size()) != na) throw Error("kernel[" + std::to_string(s) + "] has wrong length");
            for (int a = 0; a < na; ++a) {
                const auto row = kj[s][a].get<std::vector<double>>();
                if (static_cast<int>(row.size()) != ns)
                    throw Error("kernel[" + std::to_string(s) + "][" + std::to_string(a) + "] has wrong length");
                for (int sp = 0; sp < ns; ++sp) kernel(s * na + a, sp) = row[sp];
            }
        }
        const auto mu_v = j.at("mu").get<std::vector<double>>();
        Vector mu = Eigen::Map<const Vector>(mu_v.data(), static_cast<Eigen::Index>(mu_v.size()));
        return Cmp(ns, na, std::move(kernel), std::move(mu), j.at("gamma").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed CMP config: ") + e.what());
    }
}

TabularPolicy TabularPolicy::from_logits(const Matrix& logits) {
    if (logits.size() == 0) throw Error("policy logits are empty");
    if (!logits.allFinite()) throw Error("policy logits must be finite");
    TabularPolicy pi;
    pi.logits_ = logits;
    pi.probs_.resize(logits.rows(), logits.cols());
    for (Eigen::Index s = 0; s < logits.rows(); ++s) {
        const double shift = logits.row(s).maxCoeff();
        const Eigen::RowVectorXd e = (logits.row(s).array() - shift).exp();
        pi.probs_.row(s) = e / e.sum();
    }
    return pi;
}

TabularPolicy TabularPolicy::from_probs(const Matrix& probs) {
    if (probs.size() == 0) throw Error("policy probabilities are empty");
    for (Eigen::Index s = 0; s < probs.rows(); ++s) {
        if (auto msg = check_distribution(probs.row(s).transpose(), kStochasticTol); !msg.empty())
            throw Error("policy row s=" + std::to_string(s) + " " + msg);
    }
    TabularPolicy pi;
    pi.probs_ = probs;
    pi.logits_ = probs.array().log().matrix();
    return pi;
}

TabularPolicy TabularPolicy::uniform(int n_states, int n_actions) {
    return from_logits(Matrix::Zero(n_states, n_actions));
}

Vector TabularPolicy::flat_probs() const {
    Vector out(probs_.size());
    for (int s = 0; s < n_states(); ++s)
        for (int a = 0; a < n_actions(); ++a) out(s * n_actions() + a) = probs_(s, a);
    return out;
}

TabularPolicy policy_from_logits(const Matrix& logits) { return TabularPolicy::from_logits(logits); }

PolicyMixture::PolicyMixture(std::vector<TabularPolicy> components, Vector weights)
    : components_(std::move(components)), weights_(std::move(weights)) {
    if (components_.empty()) throw Error("mixture needs at least one component");
    if (weights_.size() != static_cast<Eigen::Index>(components_.size()))
        throw Error("mixture weights and components differ in length");
    if (auto msg = check_distribution(weights_, kStochasticTol); !msg.empty())
        throw Error("mixture weights " + msg);
    for (const auto& c : components_) {
        if (c.n_states() != components_.front().n_states() || c.n_actions() != components_.front().n_actions())
            throw Error("mixture components have mismatched shapes");
    }
}

PolicyMixture::PolicyMixture(std::vector<TabularPolicy> components)
    : PolicyMixture(components, Vector::Constant(static_cast<Eigen::Index>(components.size()),
                                                 1.0 / static_cast<double>(components.size()))) {}

TabularPolicy condition_occupancy(const Cmp& cmp, const Vector& omega) {
    if (omega.size() != cmp.n_pairs()) throw Error("occupancy has wrong dimension");
    Matrix probs(cmp.n_states(), cmp.n_actions());
    for (int s = 0; s < cmp.n_states(); ++s) {
        const double marginal = omega.segment(cmp.index(s, 0), cmp.n_actions()).sum();
        if (!(marginal > 0.0)) throw Error("state " + std::to_string(s) + " has zero occupancy (unreachable)");
        for (int a = 0; a < cmp.n_actions(); ++a) probs(s, a) = omega(cmp.index(s, a)) / marginal;
    }
    return TabularPolicy::from_probs(probs);
}

}  // namespace nmdp
