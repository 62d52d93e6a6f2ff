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

#include "nmdp/optimizers.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace nmdp {

namespace {

constexpr double kFlowResidualTol = 1e-8;

std::uint64_t component_seed(std::uint64_t seed, int iteration, std::size_t component) {
    // splitmix-style mixing keeps streams of neighbouring (iteration, component) pairs unrelated
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(iteration) * 1024 + component + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Vector sampled_gradient(const Cmp& cmp, const TabularPolicy& pi, const Vector& reward, int n_traj, int horizon,
                        std::uint64_t seed) {
    const double gamma = cmp.gamma();
    RolloutSampler sampler(cmp, pi, seed);
    Trajectory traj;
    Vector weight_sum = Vector::Zero(cmp.n_pairs());
    Vector return_sum = Vector::Zero(cmp.n_pairs());
    std::vector<double> to_go(horizon);
    for (int n = 0; n < n_traj; ++n) {
        sampler.rollout(horizon, traj);
        double g = 0.0;
        for (int t = horizon - 1; t >= 0; --t) {
            g = reward(cmp.index(traj.states[t], traj.actions[t])) + gamma * g;
            to_go[t] = g;
        }
        double w = 1.0 - gamma;
        for (int t = 0; t < horizon; ++t) {
            const int x = cmp.index(traj.states[t], traj.actions[t]);
            weight_sum(x) += w;
            return_sum(x) += w * to_go[t];
            w *= gamma;
        }
    }
    Vector grad = Vector::Zero(cmp.n_pairs());
    const double nt = static_cast<double>(n_traj);
    for (int s = 0; s < cmp.n_states(); ++s) {
        // V̂(s) from the visited actions only
        double v = 0.0;
        double mass = 0.0;
        for (int a = 0; a < cmp.n_actions(); ++a) {
            const int x = cmp.index(s, a);
            if (weight_sum(x) > 0.0) {
                v += pi.prob(s, a) * return_sum(x) / weight_sum(x);
                mass += pi.prob(s, a);
            }
        }
        if (mass > 0.0) v /= mass;
        for (int a = 0; a < cmp.n_actions(); ++a) {
            const int x = cmp.index(s, a);
            grad(x) = (return_sum(x) - weight_sum(x) * v) / nt;
        }
    }
    return grad;
}

void check_finite(const OptimizerState& s, const char* who) {
    bool ok = std::isfinite(s.utility) && std::isfinite(s.grad_norm);
    for (const auto& t : s.thetas) ok = ok && t.allFinite();
    for (double g : s.constraint_values) ok = ok && std::isfinite(g);
    if (!ok) {
        std::ostringstream os;
        os << who << ": non-finite iterate at iteration " << s.iteration << " (utility " << s.utility
           << ", gradient norm " << s.grad_norm << "); reduce the step size";
        throw Error(os.str());
    }
}

void fill_metrics(OptimizerState& s, const Evaluation& e) {
    s.utility = e.utility;
    s.constraint_values = e.constraint_values;
    s.flow_residual = e.flow_residual;
}

bool strictly_feasible(const Evaluation& e) {
    for (double g : e.constraint_values)
        if (!(g < 0.0)) return false;
    return true;
}

UtilityGradient problem_gradient(const Problem& p, const Evaluation& e, const OptimizerConfig& config,
                                 int iteration) {
    SamplingSpec sampling = config.sampling;
    sampling.seed = component_seed(config.sampling.seed, iteration, 0);
    if (config.mode == GradientMode::exact) {
        // Reuse the successor representations of the evaluation.
        UtilityGradient out;
        for (std::size_t i = 0; i < p.n_components(); ++i) {
            const Vector r = p.utility->differential(e.omegas, p.weights, i);
            out.components.push_back(reward_gradient(p.cmp, e.policies[i], e.srs[i], e.omegas[i], r));
        }
        return out;
    }
    return utility_gradient(p.cmp, e.mixture(p.weights), *p.utility, config.mode, sampling);
}

std::vector<Constraint> constraints_on(const Problem& p, std::size_t component) {
    std::vector<Constraint> out;
    for (const auto& c : p.constraints)
        if (c.component() == component) out.push_back(c);
    return out;
}

}  // namespace

std::string to_string(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::vpg: return "vpg";
        case OptimizerKind::hpg: return "hpg";
        case OptimizerKind::proximal: return "proximal";
    }
    return "?";
}

std::string to_string(GradientMode mode) { return mode == GradientMode::exact ? "exact" : "sampled"; }

OptimizerKind parse_optimizer_kind(const std::string& s) {
    if (s == "vpg") return OptimizerKind::vpg;
    if (s == "hpg") return OptimizerKind::hpg;
    if (s == "proximal") return OptimizerKind::proximal;
    throw Error("unknown optimizer '" + s + "' (expected vpg, hpg or proximal)");
}

GradientMode parse_gradient_mode(const std::string& s) {
    if (s == "exact") return GradientMode::exact;
    if (s == "sampled") return GradientMode::sampled;
    throw Error("unknown gradient mode '" + s + "' (expected exact or sampled)");
}

Vector flatten(const Matrix& logits) {
    Vector out(logits.size());
    for (Eigen::Index s = 0; s < logits.rows(); ++s)
        for (Eigen::Index a = 0; a < logits.cols(); ++a) out(s * logits.cols() + a) = logits(s, a);
    return out;
}

Matrix unflatten(const Vector& flat, int n_states, int n_actions) {
    if (flat.size() != static_cast<Eigen::Index>(n_states) * n_actions) throw Error("unflatten: size mismatch");
    Matrix out(n_states, n_actions);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) out(s, a) = flat(s * n_actions + a);
    return out;
}

double UtilityGradient::norm() const {
    double sq = 0.0;
    for (const auto& c : components) sq += c.squaredNorm();
    return std::sqrt(sq);
}

Vector reward_gradient(const Cmp& cmp, const TabularPolicy& pi, const SuccessorRep& sr, const Vector& omega,
                       const Vector& reward) {
    const Advantage adv = advantage_for_reward(cmp, pi, sr, reward);
    // E_ω[∇log π · A] with ∂log π(a|s)/∂θ(s,b) = δ_ab − π(b|s); the π(b|s) part vanishes
    // because Σ_a π(a|s) A(s,a) = 0.
    return omega.cwiseProduct(adv.a);
}

UtilityGradient utility_gradient(const Cmp& cmp, const PolicyMixture& mixture, const UtilityFunctional& f,
                                 GradientMode mode, const SamplingSpec& sampling) {
    const std::size_t n = mixture.size();
    UtilityGradient out;
    if (mode == GradientMode::exact) {
        std::vector<SuccessorRep> srs;
        std::vector<Vector> omegas;
        for (const auto& pi : mixture.components()) {
            srs.push_back(successor_representation(cmp, pi));
            omegas.push_back(occupancy_via_successor(cmp, pi, srs.back()));
        }
        for (std::size_t i = 0; i < n; ++i) {
            const Vector r = f.differential(omegas, mixture.weights(), i);
            out.components.push_back(reward_gradient(cmp, mixture.component(i), srs[i], omegas[i], r));
        }
        return out;
    }
    const int horizon = sampling.horizon > 0 ? sampling.horizon : truncation_horizon(cmp.gamma());
    std::vector<Vector> omegas;
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < n; ++i) {
        seeds.push_back(component_seed(sampling.seed, 0, i));
        OccupancyEstimate est = sample_occupancy(cmp, mixture.component(i), sampling.n_traj, horizon, seeds.back());
        omegas.push_back(std::move(est.mean));
        out.env_steps += est.env_steps;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Vector r = f.differential(omegas, mixture.weights(), i);
        // Same seed: the second pass replays the trajectories that produced ω̂_i.
        out.components.push_back(sampled_gradient(cmp, mixture.component(i), r, sampling.n_traj, horizon, seeds[i]));
    }
    return out;
}

Matrix state_weighted_fisher(const Cmp& cmp, const TabularPolicy& pi, const Vector& state_occupancy) {
    const int na = cmp.n_actions();
    Matrix f = Matrix::Zero(cmp.n_pairs(), cmp.n_pairs());
    for (int s = 0; s < cmp.n_states(); ++s) {
        const Eigen::VectorXd p = pi.probs().row(s).transpose();
        Matrix block = -p * p.transpose();
        block.diagonal() += p;
        f.block(s * na, s * na, na, na) = state_occupancy(s) * block;
    }
    return f;
}

Evaluation evaluate(const Problem& problem, const std::vector<Matrix>& thetas) {
    if (thetas.size() != problem.n_components()) throw Error("parameter count does not match the mixture size");
    Evaluation e;
    for (const auto& theta : thetas) {
        e.policies.push_back(TabularPolicy::from_logits(theta));
        e.srs.push_back(successor_representation(problem.cmp, e.policies.back()));
        e.omegas.push_back(occupancy_via_successor(problem.cmp, e.policies.back(), e.srs.back()));
        e.flow_residual = std::max(e.flow_residual, bellman_flow_residual(problem.cmp, e.omegas.back()));
    }
    e.utility = problem.utility->value(e.omegas, problem.weights);
    for (const auto& c : problem.constraints) {
        if (c.component() >= e.omegas.size()) throw Error("constraint refers to a missing mixture component");
        e.constraint_values.push_back(c.value(e.omegas[c.component()]));
    }
    return e;
}

OptimizerState initial_state(const Problem& problem, std::vector<Matrix> thetas, const OptimizerConfig& config) {
    if (!(config.step_size >= 0.0)) throw Error("step size must be nonnegative");
    OptimizerState s;
    s.thetas = std::move(thetas);
    s.multipliers = Vector::Zero(static_cast<Eigen::Index>(problem.constraints.size()));
    s.step_size = config.step_size;
    const Evaluation e = evaluate(problem, s.thetas);
    fill_metrics(s, e);
    s.grad_norm = problem_gradient(problem, e, config, 0).norm();
    return s;
}

OptimizerState vpg_lagrangian_step(const OptimizerState& state, const Problem& problem, const OptimizerConfig& config) {
    const Evaluation e = evaluate(problem, state.thetas);
    const UtilityGradient grad = problem_gradient(problem, e, config, state.iteration);
    std::vector<Vector> ascent = grad.components;
    for (std::size_t k = 0; k < problem.constraints.size(); ++k) {
        const Constraint& c = problem.constraints[k];
        const std::size_t i = c.component();
        const double lambda = state.multipliers(static_cast<Eigen::Index>(k));
        if (lambda == 0.0) continue;
        const Vector dg = reward_gradient(problem.cmp, e.policies[i], e.srs[i], e.omegas[i], c.differential(e.omegas[i]));
        ascent[i] -= lambda * dg;
    }
    OptimizerState next = state;
    double sq = 0.0;
    for (std::size_t i = 0; i < ascent.size(); ++i) {
        next.thetas[i] += config.step_size *
                          unflatten(ascent[i], problem.cmp.n_states(), problem.cmp.n_actions());
        sq += ascent[i].squaredNorm();
    }
    for (std::size_t k = 0; k < problem.constraints.size(); ++k) {
        auto idx = static_cast<Eigen::Index>(k);
        next.multipliers(idx) = std::max(0.0, state.multipliers(idx) + config.dual_step_size * e.constraint_values[k]);
    }
    next.iteration = state.iteration + 1;
    next.step_size = config.step_size;
    next.env_steps += grad.env_steps;
    next.grad_norm = std::sqrt(sq);
    next.last_halvings = 0;
    next.last_step_accepted = true;
    fill_metrics(next, evaluate(problem, next.thetas));
    check_finite(next, "vpg");
    return next;
}

Vector hpg_direction(const Cmp& cmp, const TabularPolicy& pi, const SuccessorRep& sr, const Vector& omega,
                     const LegendrePotential& phi, const Vector& gradient, double damping) {
    const OccupancyJacobian jac = occupancy_jacobian(cmp, pi, sr, omega);
    Matrix g = hessian_metric(jac, omega, phi).matrix;
    const double dim = static_cast<double>(g.rows());
    double eps = damping * g.trace() / dim;
    if (!(eps > 0.0)) eps = damping;
    g.diagonal().array() += eps;
    return g.completeOrthogonalDecomposition().solve(gradient);
}

OptimizerState hpg_step(const OptimizerState& state, const Problem& problem, const OptimizerConfig& config) {
    const Evaluation e = evaluate(problem, state.thetas);
    if (!strictly_feasible(e)) {
        std::ostringstream os;
        os << "hpg: iterate is not strictly feasible (constraint values";
        for (double g : e.constraint_values) os << ' ' << g;
        os << ")";
        throw Error(os.str());
    }
    const UtilityGradient grad = problem_gradient(problem, e, config, state.iteration);
    const int ns = problem.cmp.n_states();
    const int na = problem.cmp.n_actions();

    std::vector<Vector> directions;
    PotentialParams base_params;
    base_params.kind = config.potential == PotentialKind::barrier ? PotentialKind::kakade : config.potential;
    base_params.n_actions = na;
    const PotentialPtr base = potential(base_params);
    for (std::size_t i = 0; i < problem.n_components(); ++i) {
        if (config.identity_metric) {
            directions.push_back(grad.components[i]);
            continue;
        }
        auto own = constraints_on(problem, i);
        const PotentialPtr phi = own.empty() ? base : barrier_potential(base, std::move(own), config.beta, config.ell);
        directions.push_back(hpg_direction(problem.cmp, e.policies[i], e.srs[i], e.omegas[i], *phi,
                                           grad.components[i], config.damping));
    }

    OptimizerState next = state;
    next.iteration = state.iteration + 1;
    next.env_steps += grad.env_steps;
    next.grad_norm = grad.norm();
    next.last_step_accepted = false;
    double eta = config.step_size;
    for (int h = 0; h <= config.max_halvings; ++h) {
        std::vector<Matrix> candidate = state.thetas;
        for (std::size_t i = 0; i < candidate.size(); ++i) candidate[i] += eta * unflatten(directions[i], ns, na);
        bool finite = true;
        for (const auto& c : candidate) finite = finite && c.allFinite();
        if (finite) {
            const Evaluation ce = evaluate(problem, candidate);
            // the metric at the next iterate needs ω in the potential's open domain
            bool interior = true;
            if (!config.identity_metric)
                for (const auto& w : ce.omegas) interior = interior && (w.array() > 0.0).all();
            if (interior && strictly_feasible(ce) && ce.flow_residual <= kFlowResidualTol && std::isfinite(ce.utility)) {
                next.thetas = std::move(candidate);
                next.step_size = eta;
                next.last_halvings = h;
                next.last_step_accepted = true;
                fill_metrics(next, ce);
                break;
            }
        }
        eta *= 0.5;
    }
    if (!next.last_step_accepted) {
        next.last_halvings = config.max_halvings;
        next.step_size = 0.0;
        fill_metrics(next, e);
    }
    check_finite(next, "hpg");
    return next;
}

OptimizerState proximal_surrogate_step(const OptimizerState& state, const Problem& problem,
                                       const OptimizerConfig& config) {
    const Evaluation e = evaluate(problem, state.thetas);
    const UtilityGradient grad = problem_gradient(problem, e, config, state.iteration);
    const Cmp& cmp = problem.cmp;
    const int ns = cmp.n_states();
    const int na = cmp.n_actions();
    OptimizerState next = state;
    next.iteration = state.iteration + 1;
    next.grad_norm = grad.norm();
    next.env_steps += grad.env_steps;
    next.step_size = config.step_size;
    if (config.step_size > 0.0) {
        const double inv_eta = 1.0 / config.step_size;
        for (std::size_t i = 0; i < problem.n_components(); ++i) {
            const Vector r = problem.utility->differential(e.omegas, problem.weights, i);
            const Advantage adv = advantage_for_reward(cmp, e.policies[i], e.srs[i], r);
            const Vector d = Occupancy(e.omegas[i]).state_marginal(na);
            const Matrix& anchor = e.policies[i].probs();
            // Step bounded by the curvature of the surrogate in logits.
            const double lr = config.inner_lr / (2.0 * adv.a.cwiseAbs().maxCoeff() + inv_eta);
            Matrix theta = state.thetas[i];
            for (int m = 0; m < config.inner_steps; ++m) {
                const TabularPolicy pi = TabularPolicy::from_logits(theta);
                Matrix step(ns, na);
                for (int s = 0; s < ns; ++s) {
                    double mean_adv = 0.0;
                    for (int a = 0; a < na; ++a) mean_adv += pi.prob(s, a) * adv.a(cmp.index(s, a));
                    for (int b = 0; b < na; ++b) {
                        const double surrogate = pi.prob(s, b) * (adv.a(cmp.index(s, b)) - mean_adv);
                        const double kl = pi.prob(s, b) - anchor(s, b);
                        step(s, b) = d(s) * (surrogate - inv_eta * kl);
                    }
                }
                theta += lr * step;
            }
            next.thetas[i] = std::move(theta);
        }
    }
    fill_metrics(next, evaluate(problem, next.thetas));
    next.last_halvings = 0;
    next.last_step_accepted = true;
    check_finite(next, "proximal");
    return next;
}

EquivalenceReport surrogate_equivalence_check(const Cmp& cmp, const TabularPolicy& pi_k, const UtilityFunctional& f) {
    if (!pi_k.interior()) throw Error("surrogate_equivalence_check needs an interior policy");
    const int ns = cmp.n_states();
    const int na = cmp.n_actions();
    const SuccessorRep sr = successor_representation(cmp, pi_k);
    const Vector omega = occupancy_via_successor(cmp, pi_k, sr);
    const Vector d = Occupancy(omega).state_marginal(na);
    const Vector reward = f.differential(omega);
    const OccupancyJacobian jac = occupancy_jacobian(cmp, pi_k, sr, omega);

    // Mirror-descent side: chain rule through the occupancy Jacobian.
    const Vector grad_pmd = jac.matrix.transpose() * reward;

    // Surrogate side: E_{s∼ω_k, a∼π_k}[∇ log π(a|s) A_k(s,a)] assembled from score vectors.
    const Advantage adv = advantage_for_reward(cmp, pi_k, sr, reward);
    Vector grad_surr = Vector::Zero(cmp.n_pairs());
    for (int s = 0; s < ns; ++s) {
        for (int a = 0; a < na; ++a) {
            const double w = d(s) * pi_k.prob(s, a) * adv.a(cmp.index(s, a));
            for (int b = 0; b < na; ++b) grad_surr(cmp.index(s, b)) += w * ((a == b ? 1.0 : 0.0) - pi_k.prob(s, b));
        }
    }

    const Matrix fisher = state_weighted_fisher(cmp, pi_k, d);
    const PotentialPtr phi = kakade_potential(na);
    const Matrix h_pmd = hessian_metric(jac, omega, *phi).matrix;

    // ∇_θ Σ_s d(s) KL(π_k(·|s) ‖ π_θ(·|s)) = d(s) (π_θ(b|s) − π_k(b|s)); differentiate once more numerically.
    auto kl_gradient = [&](const Vector& theta) {
        const TabularPolicy pi = TabularPolicy::from_logits(unflatten(theta, ns, na));
        Vector g(cmp.n_pairs());
        for (int s = 0; s < ns; ++s)
            for (int b = 0; b < na; ++b) g(cmp.index(s, b)) = d(s) * (pi.prob(s, b) - pi_k.prob(s, b));
        return g;
    };
    const Vector theta0 = flatten(pi_k.logits());
    constexpr double h = 1e-5;
    Matrix h_surr(cmp.n_pairs(), cmp.n_pairs());
    for (int j = 0; j < cmp.n_pairs(); ++j) {
        Vector plus = theta0;
        Vector minus = theta0;
        plus(j) += h;
        minus(j) -= h;
        h_surr.col(j) = (kl_gradient(plus) - kl_gradient(minus)) / (2.0 * h);
    }

    EquivalenceReport report;
    report.gradient_gap = (grad_pmd - grad_surr).cwiseAbs().maxCoeff();
    report.pmd_hessian_gap = (h_pmd - fisher).cwiseAbs().maxCoeff();
    report.surr_hessian_gap = (h_surr - fisher).cwiseAbs().maxCoeff();
    report.passed = report.gradient_gap <= 1e-8 && report.pmd_hessian_gap <= 1e-6 && report.surr_hessian_gap <= 1e-6;
    return report;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void RunLog::write_csv(std::ostream& os) const {
    os << "iter,utility_bits";
    for (std::size_t k = 0; k < n_constraints; ++k) os << ",constraint_" << k << "_bits";
    for (std::size_t k = 0; k < n_constraints; ++k) os << ",multiplier_" << k;
    os << ",grad_norm,flow_residual,env_steps,wall_ms\n";
    for (const auto& r : records) {
        os << r.iter << ',' << format_double(r.utility_bits);
        for (double c : r.constraint_bits) os << ',' << format_double(c);
        for (double m : r.multipliers) os << ',' << format_double(m);
        os << ',' << format_double(r.grad_norm) << ',' << format_double(r.flow_residual) << ',' << r.env_steps << ','
           << format_double(r.wall_ms) << '\n';
    }
}

RunLog run_optimization(const Problem& problem, std::vector<Matrix> initial_thetas, const OptimizerConfig& config) {
    if (config.iterations < 0) throw Error("iterations must be nonnegative");
    if (!problem.utility) throw Error("problem has no utility");
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();

    RunLog log;
    log.optimizer = to_string(config.kind);
    log.seed = config.sampling.seed;
    log.n_constraints = problem.constraints.size();
    log.mode = config.mode;

    auto record = [&](const OptimizerState& s) {
        RunRecord r;
        r.iter = s.iteration;
        r.utility_bits = problem.utility->to_report(s.utility);
        for (std::size_t k = 0; k < problem.constraints.size(); ++k)
            r.constraint_bits.push_back(problem.constraints[k].base().to_report(s.constraint_values[k]));
        for (Eigen::Index k = 0; k < s.multipliers.size(); ++k) r.multipliers.push_back(s.multipliers(k));
        r.grad_norm = s.grad_norm;
        r.flow_residual = s.flow_residual;
        r.env_steps = s.env_steps;
        if (config.record_wall_time)
            r.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
        log.records.push_back(std::move(r));
    };

    OptimizerState state = initial_state(problem, std::move(initial_thetas), config);
    check_finite(state, to_string(config.kind).c_str());
    record(state);
    for (int k = 0; k < config.iterations; ++k) {
        if (state.grad_norm <= config.tol) break;
        switch (config.kind) {
            case OptimizerKind::vpg: state = vpg_lagrangian_step(state, problem, config); break;
            case OptimizerKind::hpg: state = hpg_step(state, problem, config); break;
            case OptimizerKind::proximal: state = proximal_surrogate_step(state, problem, config); break;
        }
        record(state);
    }
    log.final_thetas = state.thetas;
    return log;
}

}  // namespace nmdp
