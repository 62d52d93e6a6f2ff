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

#include "nmdp/occupancy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace nmdp {

namespace {

void check_policy_shape(const Cmp& cmp, const TabularPolicy& pi) {
    if (pi.n_states() != cmp.n_states() || pi.n_actions() != cmp.n_actions())
        throw Error("policy shape does not match the CMP");
}

Matrix solve_identity_minus(const Matrix& a, const char* what) {
    const Matrix lhs = Matrix::Identity(a.rows(), a.cols()) - a;
    Eigen::PartialPivLU<Matrix> lu(lhs);
    const double rcond = lu.rcond();
    if (!(rcond > 1e-14)) {
        std::ostringstream os;
        os << what << ": linear solve is ill-conditioned (reciprocal condition estimate " << rcond << ")";
        throw Error(os.str());
    }
    return lu.solve(Matrix::Identity(a.rows(), a.cols()));
}

}  // namespace

Occupancy::Occupancy(Vector values) : values_(std::move(values)) {
    if (auto msg = check_distribution(values_, kOccupancyMassTol); !msg.empty())
        throw Error("occupancy " + msg);
}

Vector Occupancy::state_marginal(int n_actions) const {
    const Eigen::Index ns = values_.size() / n_actions;
    Vector d(ns);
    for (Eigen::Index s = 0; s < ns; ++s) d(s) = values_.segment(s * n_actions, n_actions).sum();
    return d;
}

Matrix pair_transition_matrix(const Cmp& cmp, const TabularPolicy& pi) {
    check_policy_shape(cmp, pi);
    const int na = cmp.n_actions();
    Matrix p(cmp.n_pairs(), cmp.n_pairs());
    for (int x = 0; x < cmp.n_pairs(); ++x)
        for (int sp = 0; sp < cmp.n_states(); ++sp)
            for (int ap = 0; ap < na; ++ap) p(x, sp * na + ap) = cmp.kernel()(x, sp) * pi.prob(sp, ap);
    return p;
}

Matrix state_transition_matrix(const Cmp& cmp, const TabularPolicy& pi) {
    check_policy_shape(cmp, pi);
    Matrix p = Matrix::Zero(cmp.n_states(), cmp.n_states());
    for (int s = 0; s < cmp.n_states(); ++s)
        for (int a = 0; a < cmp.n_actions(); ++a) p.row(s) += pi.prob(s, a) * cmp.kernel().row(cmp.index(s, a));
    return p;
}

SuccessorRep successor_representation(const Cmp& cmp, const TabularPolicy& pi) {
    const Matrix forward = pair_transition_matrix(cmp, pi);
    // (I − γ P)^{-1} indexes [from, to]; transpose to [to | from].
    return {solve_identity_minus(cmp.gamma() * forward, "successor representation").transpose()};
}

Vector occupancy_via_successor(const Cmp& cmp, const TabularPolicy& pi, const SuccessorRep& sr) {
    Vector start(cmp.n_pairs());
    for (int s = 0; s < cmp.n_states(); ++s)
        for (int a = 0; a < cmp.n_actions(); ++a) start(cmp.index(s, a)) = pi.prob(s, a) * cmp.mu()(s);
    return (1.0 - cmp.gamma()) * (sr.matrix * start);
}

Vector occupancy_via_flow(const Cmp& cmp, const TabularPolicy& pi) {
    const Matrix ps = state_transition_matrix(cmp, pi);
    const Matrix lhs = Matrix::Identity(cmp.n_states(), cmp.n_states()) - cmp.gamma() * ps.transpose();
    const Vector d = lhs.partialPivLu().solve((1.0 - cmp.gamma()) * cmp.mu());
    Vector omega(cmp.n_pairs());
    for (int s = 0; s < cmp.n_states(); ++s)
        for (int a = 0; a < cmp.n_actions(); ++a) omega(cmp.index(s, a)) = d(s) * pi.prob(s, a);
    return omega;
}

Occupancy occupancy(const Cmp& cmp, const TabularPolicy& pi) {
    const SuccessorRep sr = successor_representation(cmp, pi);
    const Vector via_sr = occupancy_via_successor(cmp, pi, sr);
    Vector via_flow = occupancy_via_flow(cmp, pi);
    const double gap = (via_sr - via_flow).cwiseAbs().maxCoeff();
    if (!(gap <= 1e-10)) {
        std::ostringstream os;
        os << "occupancy routes disagree by " << gap;
        throw Error(os.str());
    }
    // Round-off can leave −1e-17 on zero-probability actions.
    via_flow = via_flow.cwiseMax(0.0);
    return Occupancy(std::move(via_flow));
}

double bellman_flow_residual(const Cmp& cmp, const Vector& omega) {
    if (omega.size() != cmp.n_pairs()) throw Error("occupancy has wrong dimension");
    const Vector residual = cmp.flow_matrix() * omega - (1.0 - cmp.gamma()) * cmp.mu();
    return residual.cwiseAbs().maxCoeff();
}

double mass_residual(const Vector& omega) { return std::abs(omega.sum() - 1.0); }

OccupancyJacobian occupancy_jacobian(const Cmp& cmp, const TabularPolicy& pi) {
    const SuccessorRep sr = successor_representation(cmp, pi);
    return occupancy_jacobian(cmp, pi, sr, occupancy_via_successor(cmp, pi, sr));
}

OccupancyJacobian occupancy_jacobian(const Cmp& cmp, const TabularPolicy& pi, const SuccessorRep& sr,
                                     const Vector& omega) {
    const int na = cmp.n_actions();
    Matrix jac(cmp.n_pairs(), cmp.n_pairs());
    for (int s = 0; s < cmp.n_states(); ++s) {
        // Σ_a ω(s,a) M(·|s,a)
        Vector weighted = Vector::Zero(cmp.n_pairs());
        for (int a = 0; a < na; ++a) weighted += omega(cmp.index(s, a)) * sr.matrix.col(cmp.index(s, a));
        for (int b = 0; b < na; ++b) {
            const int col = cmp.index(s, b);
            jac.col(col) = omega(col) * sr.matrix.col(col) - pi.prob(s, b) * weighted;
        }
    }
    return {std::move(jac)};
}

Advantage advantage_for_reward(const Cmp& cmp, const TabularPolicy& pi, const Vector& reward) {
    return advantage_for_reward(cmp, pi, successor_representation(cmp, pi), reward);
}

Advantage advantage_for_reward(const Cmp& cmp, const TabularPolicy& pi, const SuccessorRep& sr,
                               const Vector& reward) {
    if (reward.size() != cmp.n_pairs()) throw Error("reward has wrong dimension");
    if (!reward.allFinite()) throw Error("reward must be finite");
    Advantage out;
    out.q = sr.matrix.transpose() * reward;
    out.v.resize(cmp.n_states());
    out.a.resize(cmp.n_pairs());
    for (int s = 0; s < cmp.n_states(); ++s) {
        double v = 0.0;
        for (int a = 0; a < cmp.n_actions(); ++a) v += pi.prob(s, a) * out.q(cmp.index(s, a));
        out.v(s) = v;
        // Σ_b π(b|s)(Q(s,a) − Q(s,b)) keeps relative accuracy for a dominant action, where Q − V cancels.
        for (int a = 0; a < cmp.n_actions(); ++a) {
            double adv = 0.0;
            for (int b = 0; b < cmp.n_actions(); ++b)
                if (b != a) adv += pi.prob(s, b) * (out.q(cmp.index(s, a)) - out.q(cmp.index(s, b)));
            out.a(cmp.index(s, a)) = adv;
        }
    }
    return out;
}

int truncation_horizon(double gamma, double bound) {
    if (gamma <= 0.0) return 1;
    return std::max(1, static_cast<int>(std::ceil(std::log(bound) / std::log(gamma))));
}

RolloutSampler::RolloutSampler(const Cmp& cmp, const TabularPolicy& pi, std::uint64_t seed)
    : cmp_(cmp), engine_(seed) {
    check_policy_shape(cmp, pi);
    policy_cdf_ = pi.probs();
    for (Eigen::Index c = 1; c < policy_cdf_.cols(); ++c) policy_cdf_.col(c) += policy_cdf_.col(c - 1);
    kernel_cdf_ = cmp.kernel();
    for (Eigen::Index c = 1; c < kernel_cdf_.cols(); ++c) kernel_cdf_.col(c) += kernel_cdf_.col(c - 1);
    mu_cdf_ = cmp.mu();
    for (Eigen::Index i = 1; i < mu_cdf_.size(); ++i) mu_cdf_(i) += mu_cdf_(i - 1);
}

int RolloutSampler::draw(const Eigen::Ref<const Eigen::RowVectorXd>& cdf) {
    // 53-bit uniform in [0,1), independent of the standard library's distributions.
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    const int n = static_cast<int>(cdf.size());
    for (int i = 0; i < n - 1; ++i)
        if (u < cdf(i)) return i;
    return n - 1;
}

void RolloutSampler::rollout(int horizon, Trajectory& out) {
    out.states.resize(horizon);
    out.actions.resize(horizon);
    int s = draw(mu_cdf_.transpose());
    for (int t = 0; t < horizon; ++t) {
        const int a = draw(policy_cdf_.row(s));
        out.states[t] = s;
        out.actions[t] = a;
        if (t + 1 < horizon) s = draw(kernel_cdf_.row(cmp_.index(s, a)));
    }
}

OccupancyEstimate sample_occupancy(const Cmp& cmp, const TabularPolicy& pi, int n_traj, int horizon,
                                   std::uint64_t seed) {
    if (n_traj <= 0 || horizon <= 0) throw Error("sample_occupancy needs positive n_traj and horizon");
    const double gamma = cmp.gamma();
    RolloutSampler sampler(cmp, pi, seed);
    Trajectory traj;
    Vector sum = Vector::Zero(cmp.n_pairs());
    Vector sum_sq = Vector::Zero(cmp.n_pairs());
    Vector per = Vector::Zero(cmp.n_pairs());
    std::vector<int> touched;
    for (int n = 0; n < n_traj; ++n) {
        sampler.rollout(horizon, traj);
        touched.clear();
        double w = 1.0 - gamma;
        for (int t = 0; t < horizon; ++t) {
            const int x = cmp.index(traj.states[t], traj.actions[t]);
            if (per(x) == 0.0) touched.push_back(x);
            per(x) += w;
            w *= gamma;
        }
        for (int x : touched) {
            sum(x) += per(x);
            sum_sq(x) += per(x) * per(x);
            per(x) = 0.0;
        }
    }
    OccupancyEstimate est;
    const double nt = static_cast<double>(n_traj);
    est.mean = sum / nt;
    est.standard_error.resize(cmp.n_pairs());
    for (int x = 0; x < cmp.n_pairs(); ++x) {
        const double var = n_traj > 1 ? std::max(0.0, (sum_sq(x) - nt * est.mean(x) * est.mean(x)) / (nt - 1.0)) : 0.0;
        est.standard_error(x) = std::sqrt(var / nt);
    }
    est.horizon = horizon;
    est.truncation_bias = std::pow(gamma, horizon);
    est.env_steps = static_cast<std::int64_t>(n_traj) * horizon;
    return est;
}

ScalarEstimate discounted_expectation(const Cmp& cmp, const TabularPolicy& pi, const Vector& f, int n_traj,
                                      int horizon, std::uint64_t seed) {
    if (f.size() != cmp.n_pairs()) throw Error("function has wrong dimension");
    if (n_traj <= 0 || horizon <= 0) throw Error("discounted_expectation needs positive n_traj and horizon");
    RolloutSampler sampler(cmp, pi, seed);
    Trajectory traj;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int n = 0; n < n_traj; ++n) {
        sampler.rollout(horizon, traj);
        double w = 1.0 - cmp.gamma();
        double total = 0.0;
        for (int t = 0; t < horizon; ++t) {
            total += w * f(cmp.index(traj.states[t], traj.actions[t]));
            w *= cmp.gamma();
        }
        sum += total;
        sum_sq += total * total;
    }
    const double nt = static_cast<double>(n_traj);
    ScalarEstimate out;
    out.mean = sum / nt;
    const double var = n_traj > 1 ? std::max(0.0, (sum_sq - nt * out.mean * out.mean) / (nt - 1.0)) : 0.0;
    out.standard_error = std::sqrt(var / nt);
    return out;
}

TabularPolicy deterministic_policy(const Cmp& cmp, const std::vector<int>& actions) {
    if (static_cast<int>(actions.size()) != cmp.n_states()) throw Error("one action per state required");
    Matrix probs = Matrix::Zero(cmp.n_states(), cmp.n_actions());
    for (int s = 0; s < cmp.n_states(); ++s) {
        if (actions[s] < 0 || actions[s] >= cmp.n_actions()) throw Error("action index out of range");
        probs(s, actions[s]) = 1.0;
    }
    return TabularPolicy::from_probs(probs);
}

LinearSolution solve_linear_baseline(const Cmp& cmp, const Vector& reward) {
    if (reward.size() != cmp.n_pairs()) throw Error("reward has wrong dimension");
    const int ns = cmp.n_states();
    const int na = cmp.n_actions();
    const double gamma = cmp.gamma();
    Vector v = Vector::Zero(ns);
    Vector q(cmp.n_pairs());
    LinearSolution out;
    constexpr int kMaxIterations = 10'000'000;
    for (int it = 0; it < kMaxIterations; ++it) {
        q = reward + gamma * (cmp.kernel() * v);
        Vector next(ns);
        for (int s = 0; s < ns; ++s) next(s) = q.segment(s * na, na).maxCoeff();
        const double delta = (next - v).cwiseAbs().maxCoeff();
        v = std::move(next);
        out.iterations = it + 1;
        // Relative floor keeps the loop finite when |V| is large enough that 1e-12 is below one ulp.
        if (delta <= 1e-12 * std::max(1.0, v.cwiseAbs().maxCoeff())) break;
    }
    q = reward + gamma * (cmp.kernel() * v);
    out.policy.resize(ns);
    for (int s = 0; s < ns; ++s) {
        const double best = q.segment(s * na, na).maxCoeff();
        const double tie_tol = 1e-10 * std::max(1.0, std::abs(best));
        int choice = 0;
        while (q(s * na + choice) < best - tie_tol) ++choice;
        out.policy[s] = choice;
    }
    out.state_values = v;
    const Occupancy greedy = occupancy(cmp, deterministic_policy(cmp, out.policy));
    out.value = reward.dot(greedy.values());
    return out;
}

void write_occupancy_csv(std::ostream& os, const Cmp& cmp, const Vector& omega) {
    os << "s,a,omega\n";
    char buf[64];
    for (int s = 0; s < cmp.n_states(); ++s) {
        for (int a = 0; a < cmp.n_actions(); ++a) {
            std::snprintf(buf, sizeof(buf), "%.17g", omega(cmp.index(s, a)));
            os << s << ',' << a << ',' << buf << '\n';
        }
    }
}

}  // namespace nmdp
