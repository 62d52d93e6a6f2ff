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

#include "nmdp/harness.hpp"

#include "oracles.hpp"

#include <array>
#include <chrono>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

namespace nmdp {

namespace {

namespace orc = nmdp::oracle;

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

/// Running worst case of a quantity that must stay at or below a tolerance.
class Bound {
public:
    Bound(std::string what, double tol) : what_(std::move(what)), tol_(tol) {}

    void observe(double v) {
        if (std::isnan(v)) v = kInf;
        worst_ = std::max(worst_, v);
    }
    bool ok() const { return worst_ <= tol_; }
    std::string text() const { return what_ + " " + sci(worst_) + " (tol " + sci(tol_) + ")"; }

private:
    std::string what_;
    double tol_;
    double worst_ = 0.0;
};

/// Accumulates sub-results of one check.
class Verdict {
public:
    void add(const Bound& b) { add(b.ok(), b.text()); }
    void add(bool ok, const std::string& text) {
        ok_ = ok_ && ok;
        if (!detail_.empty()) detail_ += "; ";
        detail_ += (ok ? "" : "FAILED ") + text;
    }
    bool ok() const { return ok_; }
    const std::string& detail() const { return detail_; }

private:
    bool ok_ = true;
    std::string detail_;
};

double rel(const Matrix& a, const Matrix& b, double floor = 1e-8) { return orc::rel_err(a, b, floor); }

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

int draw(std::mt19937_64& rng, int lo, int hi) { return lo + static_cast<int>(rng() % static_cast<unsigned>(hi - lo + 1)); }

/// Σ_s d(s) (diag π_s − π_s π_sᵀ), written out per entry.
Matrix fisher_oracle(const Matrix& probs, const Vector& d) {
    const auto ns = probs.rows();
    const auto na = probs.cols();
    Matrix f = Matrix::Zero(ns * na, ns * na);
    for (Eigen::Index s = 0; s < ns; ++s)
        for (Eigen::Index a = 0; a < na; ++a)
            for (Eigen::Index b = 0; b < na; ++b)
                f(s * na + a, s * na + b) = d(s) * ((a == b ? probs(s, a) : 0.0) - probs(s, a) * probs(s, b));
    return f;
}

double kl(const Vector& p, const Vector& q) {
    double out = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i)
        if (p(i) > 0.0) out += p(i) * std::log(p(i) / q(i));
    return out;
}

/// θ ↦ f(ω(θ)) for one mixture component, through the forward-propagation oracle.
double utility_through_oracle(const Cmp& cmp, const UtilityFunctional& f, std::vector<Matrix> thetas, const Vector& z,
                              std::size_t component, const Vector& flat) {
    thetas[component] = orc::unflatten_rows(flat, cmp.n_states(), cmp.n_actions());
    std::vector<Vector> omegas;
    for (const auto& t : thetas) omegas.push_back(orc::forward_occupancy(cmp, orc::softmax_rows(t)));
    return f.value(omegas, z);
}

Problem single_problem(const Cmp& cmp, UtilityPtr f, std::vector<Constraint> cons = {}) {
    return Problem{cmp, std::move(f), std::move(cons), Vector::Ones(1)};
}

// ---------------------------------------------------------------------------------------------- cmp

Verdict check_cmp_validation() {
    Verdict v;
    Matrix k(2, 1);
    k << 1.0, 1.0;
    Matrix bad = k;
    bad(0, 0) = 1.1;
    v.add(!validate_cmp(1, 2, bad, Vector::Ones(1), 0.9).empty(), "row sum 1.1 rejected");
    bad = k;
    bad(0, 0) = -0.5;
    v.add(!validate_cmp(1, 2, bad, Vector::Ones(1), 0.9).empty(), "negative entry rejected");
    v.add(!validate_cmp(1, 2, Matrix::Ones(2, 1), Vector::Ones(1), 1.0).empty(), "gamma = 1 rejected");
    v.add(!validate_cmp(1, 2, Matrix::Ones(2, 1), Vector::Constant(1, 0.5), 0.5).empty(), "mu mass 0.5 rejected");
    v.add(validate_cmp(1, 2, Matrix::Ones(2, 1), Vector::Ones(1), 0.0).empty(), "valid CMP accepted");
    return v;
}

Verdict check_cmp_softmax() {
    Verdict v;
    std::mt19937_64 rng(11);
    Bound shift("max |π(θ + c) − π(θ)|", 1e-13);
    Bound oracle("max |π − oracle softmax|", 1e-15);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix t = orc::random_logits(rng, 4, 3, 3.0);
        const Matrix p = policy_from_logits(t).probs();
        Matrix shifted = t;
        for (int s = 0; s < 4; ++s) shifted.row(s).array() += 100.0 * (s - 1.5);
        shift.observe((policy_from_logits(shifted).probs() - p).cwiseAbs().maxCoeff());
        oracle.observe((orc::softmax_rows(t) - p).cwiseAbs().maxCoeff());
    }
    Matrix big(1, 2);
    big << 1000.0, 0.0;
    v.add(policy_from_logits(big).probs().allFinite() && policy_from_logits(big).prob(0, 0) == 1.0,
          "logit 1000 stays finite");
    v.add(shift);
    v.add(oracle);
    return v;
}

Verdict check_cmp_round_trips() {
    Verdict v;
    std::mt19937_64 rng(12);
    Bound json_gap("JSON round trip gap", 0.0);
    Bound cond("condition_occupancy round trip", 1e-9);
    for (int trial = 0; trial < 20; ++trial) {
        const Cmp cmp = orc::random_cmp(rng, draw(rng, 1, 6), draw(rng, 1, 5), 0.9);
        const Cmp back = Cmp::from_json(nlohmann::json::parse(cmp.to_json().dump()));
        json_gap.observe((back.kernel() - cmp.kernel()).cwiseAbs().maxCoeff() +
                         (back.mu() - cmp.mu()).cwiseAbs().maxCoeff() + std::abs(back.gamma() - cmp.gamma()));
        const auto pi = policy_from_logits(orc::random_logits(rng, cmp.n_states(), cmp.n_actions()));
        Vector mu = cmp.mu().array() + 0.05;
        const Cmp full(cmp.n_states(), cmp.n_actions(), cmp.kernel(), mu / mu.sum(), cmp.gamma());
        cond.observe((condition_occupancy(full, occupancy(full, pi).values()).probs() - pi.probs()).cwiseAbs().maxCoeff());
    }
    v.add(json_gap);
    v.add(cond);
    return v;
}

// ---------------------------------------------------------------------------------------- occupancy

Verdict check_occupancy_random() {
    Verdict v;
    std::mt19937_64 rng(1001);
    Bound flow("flow residual", 1e-9);
    Bound routes("SR vs direct solve", 1e-10);
    Bound forward("vs forward propagation", 1e-10);
    Bound neumann("Neumann tail excess", 1e-9);
    Bound backward("backward equation residual", 1e-9);
    const auto start = std::chrono::steady_clock::now();
    for (int trial = 0; trial < 100; ++trial) {
        const double gamma = std::array{0.0, 0.5, 0.9, 0.99}[trial % 4];
        const Cmp cmp = orc::random_cmp(rng, draw(rng, 1, 8), draw(rng, 1, 8), gamma, trial % 3 == 0);
        const Matrix probs = orc::softmax_rows(orc::random_logits(rng, cmp.n_states(), cmp.n_actions()));
        const auto pi = TabularPolicy::from_probs(probs);
        const SuccessorRep sr = successor_representation(cmp, pi);
        const Vector via_sr = occupancy_via_successor(cmp, pi, sr);
        const Vector direct = occupancy_via_flow(cmp, pi);
        flow.observe(bellman_flow_residual(cmp, via_sr));
        flow.observe(mass_residual(via_sr));
        routes.observe((via_sr - direct).cwiseAbs().maxCoeff());
        forward.observe((via_sr - orc::forward_occupancy(cmp, probs)).cwiseAbs().maxCoeff());
        const Matrix p = pair_transition_matrix(cmp, pi);
        const Matrix& m = sr.matrix;
        backward.observe((m - Matrix::Identity(m.rows(), m.cols()) - gamma * m * p.transpose()).cwiseAbs().maxCoeff() /
                         std::max(1.0, m.cwiseAbs().maxCoeff()));
        for (int t : {0, 3, 10}) {
            const Matrix n = orc::neumann_successor(cmp, probs, t);
            const double bound = std::pow(gamma, t + 1) / (1.0 - gamma);
            neumann.observe((m.transpose() - n.transpose()).rowwise().lpNorm<1>().maxCoeff() - bound);
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    v.add(flow);
    v.add(routes);
    v.add(forward);
    v.add(neumann);
    v.add(backward);
    v.add(secs < 10.0, "runtime " + sci(secs) + " s (limit 10 s)");
    return v;
}

Verdict check_occupancy_examples() {
    Verdict v;
    const Cmp chain = build_two_state({0.5, 1.0});
    const Vector omega = occupancy(chain, TabularPolicy::uniform(2, 2)).values();
    v.add((omega - vec({0.375, 0.375, 0.125, 0.125})).cwiseAbs().maxCoeff() < 1e-12, "uniform chain at gamma 0.5");
    const Cmp myopic = build_two_state({0.0, 1.0});
    v.add((occupancy(myopic, TabularPolicy::uniform(2, 2)).values() - vec({0.5, 0.5, 0.0, 0.0})).cwiseAbs().maxCoeff() <
              1e-15,
          "gamma 0 gives mu times pi");
    v.add(std::abs(bellman_flow_residual(chain, vec({0.25, 0.25, 0.25, 0.25})) - 0.25) < 1e-12,
          "uniform vector has flow residual 0.25");
    v.add(truncation_horizon(0.5) == 27 && truncation_horizon(0.0) == 1, "truncation horizon");
    return v;
}

Verdict check_occupancy_monte_carlo() {
    Verdict v;
    const Cmp chain = build_two_state();
    std::mt19937_64 rng(2002);
    const auto start = std::chrono::steady_clock::now();
    int inside = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const auto pi = policy_from_logits(orc::random_logits(rng, 2, 2));
        const Vector f = orc::random_vector(rng, 4);
        const double exact = f.dot(occupancy(chain, pi).values());
        const ScalarEstimate est =
            discounted_expectation(chain, pi, f, 100000, truncation_horizon(chain.gamma()), 500 + trial);
        const double z = std::abs(est.mean - exact) / est.standard_error;
        worst = std::max(worst, z);
        if (z <= 3.0) ++inside;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    v.add(inside == 10, std::to_string(inside) + "/10 within 3 standard errors (worst " + sci(worst) + " SE)");
    v.add(secs < 60.0, "runtime " + sci(secs) + " s (limit 60 s)");
    return v;
}

Verdict check_occupancy_sampler() {
    Verdict v;
    const Cmp chain = build_two_state({0.5, 1.0});
    const auto est = sample_occupancy(chain, TabularPolicy::uniform(2, 2), 20000, truncation_horizon(0.5), 7);
    const Vector exact = vec({0.375, 0.375, 0.125, 0.125});
    bool within = true;
    for (int x = 0; x < 4; ++x)
        within = within && std::abs(est.mean(x) - exact(x)) <= 4.0 * est.standard_error(x) + est.truncation_bias;
    v.add(within, "sampled occupancy within 4 SE");
    v.add(est.env_steps == 20000LL * truncation_horizon(0.5), "env step count");
    const auto again = sample_occupancy(chain, TabularPolicy::uniform(2, 2), 20000, truncation_horizon(0.5), 7);
    v.add(again.mean == est.mean, "same seed, same estimate");
    return v;
}

Verdict check_occupancy_jacobian() {
    Verdict v;
    std::mt19937_64 rng(3003);
    Bound jac("Jacobian vs finite differences", 1e-5);
    int scaled_rejected = 0;
    int scaled_trials = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const double gamma = std::array{0.5, 0.9}[trial % 2];
        const Cmp cmp = orc::random_cmp(rng, draw(rng, 1, 5), draw(rng, 2, 4), gamma);
        const Matrix theta = orc::random_logits(rng, cmp.n_states(), cmp.n_actions());
        const Matrix analytic = occupancy_jacobian(cmp, policy_from_logits(theta)).matrix;
        const auto omega_of = [&](const Vector& x) {
            return orc::forward_occupancy(cmp, orc::softmax_rows(orc::unflatten_rows(x, cmp.n_states(), cmp.n_actions())));
        };
        const Matrix fd = orc::fd_jacobian(omega_of, orc::flatten_rows(theta), 1e-5);
        jac.observe(rel(analytic, fd, 1e-6));
        // the constant in front of the expectation is 1; both (1−γ)-rescalings are far off
        ++scaled_trials;
        if (rel((1.0 - gamma) * analytic, fd, 1e-6) > 1e-2 && rel(analytic / (1.0 - gamma), fd, 1e-6) > 1e-2)
            ++scaled_rejected;
    }
    v.add(jac);
    v.add(scaled_rejected == scaled_trials,
          "(1-gamma) and 1/(1-gamma) rescalings rejected on " + std::to_string(scaled_rejected) + "/" +
              std::to_string(scaled_trials));
    return v;
}

Verdict check_occupancy_advantage() {
    Verdict v;
    std::mt19937_64 rng(4004);
    Bound centred("max |Σ_a π A|", 1e-10);
    Bound bellman("Q Bellman residual", 1e-9);
    for (int trial = 0; trial < 20; ++trial) {
        const Cmp cmp = orc::random_cmp(rng, draw(rng, 1, 6), draw(rng, 1, 4), 0.9);
        const auto pi = policy_from_logits(orc::random_logits(rng, cmp.n_states(), cmp.n_actions()));
        const Vector r = orc::random_vector(rng, cmp.n_pairs());
        const Advantage adv = advantage_for_reward(cmp, pi, r);
        for (int s = 0; s < cmp.n_states(); ++s) {
            double m = 0.0;
            for (int a = 0; a < cmp.n_actions(); ++a) m += pi.prob(s, a) * adv.a(cmp.index(s, a));
            centred.observe(std::abs(m));
        }
        Vector v_next(cmp.n_states());
        for (int s = 0; s < cmp.n_states(); ++s) {
            double acc = 0.0;
            for (int a = 0; a < cmp.n_actions(); ++a) acc += pi.prob(s, a) * adv.q(cmp.index(s, a));
            v_next(s) = acc;
        }
        bellman.observe((adv.q - r - cmp.gamma() * cmp.kernel() * v_next).cwiseAbs().maxCoeff());
    }
    v.add(centred);
    v.add(bellman);
    return v;
}

Verdict check_value_iteration() {
    Verdict v;
    std::mt19937_64 rng(5005);
    Bound gap("value iteration vs enumeration", 1e-9);
    for (int trial = 0; trial < 10; ++trial) {
        const Cmp cmp = orc::random_cmp(rng, draw(rng, 1, 4), draw(rng, 1, 3), 0.9);
        const Vector r = orc::random_vector(rng, cmp.n_pairs());
        double best = -kInf;
        std::vector<int> actions(cmp.n_states(), 0);
        while (true) {
            Matrix probs = Matrix::Zero(cmp.n_states(), cmp.n_actions());
            for (int s = 0; s < cmp.n_states(); ++s) probs(s, actions[s]) = 1.0;
            best = std::max(best, r.dot(orc::forward_occupancy(cmp, probs)));
            int s = 0;
            while (s < cmp.n_states() && ++actions[s] == cmp.n_actions()) actions[s++] = 0;
            if (s == cmp.n_states()) break;
        }
        gap.observe(std::abs(solve_linear_baseline(cmp, r).value - best));
    }
    v.add(gap);
    return v;
}

// ---------------------------------------------------------------------------------------- utilities

struct NamedUtility {
    std::string label;
    UtilityPtr f;
    std::size_t components;
};

std::vector<NamedUtility> shipped_utilities(std::mt19937_64& rng, const Cmp& cmp) {
    const int na = cmp.n_actions();
    const Vector ref = orc::forward_occupancy(cmp, orc::softmax_rows(orc::random_logits(rng, cmp.n_states(), na)));
    return {{"linear", linear_utility(orc::random_vector(rng, cmp.n_pairs())), 1},
            {"entropy(state_action)", entropy_utility(EntropyMode::state_action, na), 1},
            {"entropy(state)", entropy_utility(EntropyMode::state, na), 1},
            {"mixture_mi(state)", mixture_mutual_information(LabelSpace::state, na), 2},
            {"mixture_mi(state_action)", mixture_mutual_information(LabelSpace::state_action, na), 2},
            {"js_to_reference", js_to_reference(Occupancy(ref)), 1}};
}

Verdict check_utility_differentials() {
    Verdict v;
    std::mt19937_64 rng(6006);
    Bound grad("flow-tangent differential vs finite differences", 1e-6);
    Bound hess("flow-tangent Hessian vs finite differences", 1e-5);
    for (int trial = 0; trial < 10; ++trial) {
        const Cmp cmp = orc::random_cmp(rng, draw(rng, 2, 4), draw(rng, 2, 3), 0.9);
        const Matrix basis = orc::flow_tangent_basis(cmp);
        std::vector<Vector> omegas;
        for (int i = 0; i < 2; ++i)
            omegas.push_back(orc::forward_occupancy(cmp, orc::softmax_rows(orc::random_logits(rng, cmp.n_states(), cmp.n_actions()))));
        for (const auto& u : shipped_utilities(rng, cmp)) {
            const std::vector<Vector> om(omegas.begin(), omegas.begin() + static_cast<long>(u.components));
            const Vector zz = Vector::Constant(static_cast<Eigen::Index>(u.components), 1.0 / u.components);
            for (std::size_t i = 0; i < u.components; ++i) {
                const auto value = [&](const Vector& x) {
                    std::vector<Vector> moved = om;
                    moved[i] = x;
                    return u.f->value(moved, zz);
                };
                const Vector analytic = basis.transpose() * u.f->differential(om, zz, i);
                const Vector fd = orc::fd_directional(value, om[i], basis);
                grad.observe((analytic - fd).cwiseAbs().maxCoeff() / std::max(1.0, fd.cwiseAbs().maxCoeff()));
            }
            if (const auto* single = dynamic_cast<const SingleOccupancyUtility*>(u.f.get())) {
                const Matrix h = basis.transpose() * single->hessian(omegas[0]) * basis;
                Matrix fd(basis.cols(), basis.cols());
                constexpr double step = 1e-5;
                for (Eigen::Index j = 0; j < basis.cols(); ++j) {
                    const Vector gp = single->gradient(omegas[0] + step * basis.col(j));
                    const Vector gm = single->gradient(omegas[0] - step * basis.col(j));
                    fd.col(j) = basis.transpose() * (gp - gm) / (2.0 * step);
                }
                hess.observe((h - fd).cwiseAbs().maxCoeff() / std::max(1.0, fd.cwiseAbs().maxCoeff()));
            }
        }
    }
    v.add(grad);
    v.add(hess);
    return v;
}

Verdict check_entropy_examples() {
    Verdict v;
    const auto h = entropy_utility(EntropyMode::state_action, 2);
    v.add(std::abs(h->to_report(h->value(Vector::Constant(4, 0.25))) - 2.0) < 1e-12, "uniform over 4 pairs is 2 bits");
    v.add(std::abs(h->to_report(h->value(vec({0.375, 0.375, 0.125, 0.125}))) - 1.8112781244591327) < 1e-12,
          "chain occupancy is 1.8113 bits");
    const auto hs = entropy_utility(EntropyMode::state, 2);
    v.add(std::abs(hs->to_report(hs->value(vec({0.375, 0.375, 0.125, 0.125}))) - 0.8112781244591328) < 1e-12,
          "state entropy 0.8113 bits");
    std::mt19937_64 rng(6007);
    bool bounded = true;
    for (int trial = 0; trial < 50; ++trial) {
        const Vector p = orc::random_simplex(rng, 6);
        const double val = h->value(p);
        bounded = bounded && val >= 0.0 && val <= std::log(6.0) + 1e-12 && std::abs(val - orc::shannon(p)) < 1e-12;
    }
    v.add(bounded, "0 <= H <= log |S||A| and matches Shannon");
    return v;
}

Verdict check_jensen_bregman() {
    Verdict v;
    std::mt19937_64 rng(7007);
    Bound fr("FR dispersion vs Σ z D(ω_i‖ω̄)", 1e-10);
    Bound kak("kakade dispersion vs Σ z D(ω_i‖ω̄)", 1e-10);
    Bound mi("FR dispersion vs brute-force MI", 1e-10);
    Bound mi_fn("mixture_mi(state_action) vs brute-force MI", 1e-10);
    for (int trial = 0; trial < 50; ++trial) {
        const int na = draw(rng, 1, 3);
        const int n = na * draw(rng, 1, 4);
        const int k = draw(rng, 2, 4);
        std::vector<Vector> omegas;
        for (int i = 0; i < k; ++i) omegas.push_back(orc::random_simplex(rng, n));
        const Vector z = orc::random_simplex(rng, k);
        const Vector bar = mixture_occupancy(omegas, z);
        for (const auto& [phi, bound] : {std::pair{fisher_rao_potential(), &fr}, std::pair{kakade_potential(na), &kak}}) {
            double sum = 0.0;
            for (int i = 0; i < k; ++i) sum += z(i) * bregman_divergence(*phi, omegas[i], bar);
            bound->observe(std::abs(dispersion(*phi, omegas, z) - sum));
        }
        const double brute = orc::brute_force_mi(omegas, z);
        mi.observe(std::abs(dispersion(*fisher_rao_potential(), omegas, z) - brute));
        mi_fn.observe(std::abs(mixture_mutual_information(LabelSpace::state_action, na)->value(omegas, z) - brute));
    }
    v.add(fr);
    v.add(kak);
    v.add(mi);
    v.add(mi_fn);
    const std::vector<Vector> disjoint{vec({0.5, 0.5, 0.0, 0.0}), vec({0.0, 0.0, 0.5, 0.5})};
    const auto f = mixture_mutual_information(LabelSpace::state_action, 1);
    v.add(std::abs(f->to_report(f->value(disjoint, Vector::Constant(2, 0.5))) - 1.0) < 1e-12,
          "disjoint even mixture is 1 bit");
    const std::vector<Vector> same{vec({0.25, 0.25, 0.25, 0.25}), vec({0.25, 0.25, 0.25, 0.25})};
    v.add(std::abs(f->value(same, Vector::Constant(2, 0.5))) < 1e-15, "identical components give 0");
    return v;
}

Verdict check_js() {
    Verdict v;
    std::mt19937_64 rng(7008);
    bool ok = true;
    for (int trial = 0; trial < 50; ++trial) {
        const Vector p = orc::random_simplex(rng, 5);
        const Vector q = orc::random_simplex(rng, 5);
        const double pq = js_to_reference(Occupancy(q))->value(p);
        const double qp = js_to_reference(Occupancy(p))->value(q);
        const Vector m = 0.5 * (p + q);
        const double oracle = 0.5 * kl(p, m) + 0.5 * kl(q, m);
        ok = ok && std::abs(pq - qp) < 1e-14 && std::abs(pq - oracle) < 1e-14 && pq >= 0.0 && pq <= std::log(2.0);
        ok = ok && std::abs(js_to_reference(Occupancy(p))->value(p)) < 1e-15;
    }
    v.add(ok, "symmetric, matches the KL oracle, 0 at the reference, at most 1 bit");
    const auto js = js_to_reference(Occupancy(vec({0.5, 0.5, 0.0, 0.0})));
    v.add(std::abs(js->to_report(js->value(vec({0.0, 0.0, 0.5, 0.5}))) - 1.0) < 1e-12, "disjoint supports give 1 bit");
    return v;
}

Verdict check_constraints() {
    Verdict v;
    const Vector ref = vec({0.4, 0.3, 0.2, 0.1});
    const auto js = js_to_reference(Occupancy(ref));
    const Constraint c = make_constraint(js, 0.1);
    const Vector w = vec({0.3, 0.3, 0.2, 0.2});
    v.add(std::abs(c.value_report(w) - (js->to_report(js->value(w)) - 0.1)) < 1e-14, "g = JS - threshold in bits");
    v.add(std::abs(c.value(w) - (js->value(w) - 0.1 / kBitsPerNat)) < 1e-15, "internal value in nats");
    v.add(c.value(ref) < 0.0 && c.slack(ref) > 0.0, "reference is strictly feasible");
    return v;
}

// ---------------------------------------------------------------------------------------- geometry

Verdict check_bregman() {
    Verdict v;
    const auto fr = fisher_rao_potential();
    const double d = bregman_divergence(*fr, vec({0.75, 0.25}), vec({0.5, 0.5}));
    v.add(std::abs(d - 0.13081203594113697) < 1e-15, "KL((.75,.25)‖(.5,.5)) = " + sci(d) + " nats");
    v.add(std::abs(d * kBitsPerNat - 0.1887) < 5e-5, "which is 0.1887 bits");
    std::mt19937_64 rng(8008);
    Bound frkl("FR Bregman vs KL", 1e-12);
    Bound kak("kakade Bregman vs conditional KL", 1e-12);
    for (int trial = 0; trial < 30; ++trial) {
        const Vector p = orc::random_simplex(rng, 6);
        const Vector q = orc::random_simplex(rng, 6);
        frkl.observe(std::abs(bregman_divergence(*fr, p, q) - kl(p, q)));
        const int na = 3;
        double cond = 0.0;
        for (int s = 0; s < 2; ++s) {
            const Vector ps = p.segment(s * na, na);
            const Vector qs = q.segment(s * na, na);
            cond += ps.sum() * kl(ps / ps.sum(), qs / qs.sum());
        }
        kak.observe(std::abs(bregman_divergence(*kakade_potential(na), p, q) - cond));
    }
    v.add(frkl);
    v.add(kak);
    return v;
}

Verdict check_potential_derivatives() {
    Verdict v;
    std::mt19937_64 rng(9009);
    Bound grad("potential gradient vs finite differences", 1e-6);
    Bound hess("potential Hessian vs finite differences", 1e-5);
    for (int trial = 0; trial < 20; ++trial) {
        const int na = draw(rng, 2, 3);
        const int n = na * draw(rng, 2, 3);
        const Vector ref = orc::random_simplex(rng, n);
        const Vector omega = 0.9 * ref + 0.1 * orc::random_simplex(rng, n);
        const auto js = js_to_reference(Occupancy(ref));
        std::vector<Constraint> cons{make_constraint(js, js->to_report(js->value(omega)) + 0.05)};
        const std::vector<PotentialPtr> phis{fisher_rao_potential(), kakade_potential(na),
                                             barrier_potential(kakade_potential(na), cons, 0.7, BarrierKind::neg_log),
                                             barrier_potential(kakade_potential(na), cons, 0.7, BarrierKind::entropic)};
        // sum-zero directions e_i − e_last
        Matrix basis = Matrix::Zero(n, n - 1);
        for (int i = 0; i < n - 1; ++i) {
            basis(i, i) = 1.0;
            basis(n - 1, i) = -1.0;
        }
        for (const auto& phi : phis) {
            const auto value = [&](const Vector& x) { return phi->value(x); };
            const Vector analytic = basis.transpose() * phi->gradient(omega);
            const Vector fd = orc::fd_directional(value, omega, basis);
            grad.observe((analytic - fd).cwiseAbs().maxCoeff() / std::max(1.0, fd.cwiseAbs().maxCoeff()));
            Matrix hfd(n - 1, n - 1);
            constexpr double step = 1e-6;
            for (int j = 0; j < n - 1; ++j)
                hfd.col(j) = basis.transpose() *
                             (phi->gradient(omega + step * basis.col(j)) - phi->gradient(omega - step * basis.col(j))) /
                             (2.0 * step);
            const Matrix h = basis.transpose() * phi->hessian(omega) * basis;
            hess.observe((h - hfd).cwiseAbs().maxCoeff() / std::max(1.0, hfd.cwiseAbs().maxCoeff()));
        }
    }
    v.add(grad);
    v.add(hess);
    return v;
}

Verdict check_barrier_domain() {
    Verdict v;
    const Vector ref = vec({0.4, 0.3, 0.2, 0.1});
    const auto js = js_to_reference(Occupancy(ref));
    const auto b = barrier_potential(kakade_potential(2), {make_constraint(js, 0.01)}, 1.0, BarrierKind::neg_log);
    const Vector far = vec({0.05, 0.05, 0.1, 0.8});
    v.add(std::isinf(b->value(far)) && b->value(far) > 0.0, "+inf outside the feasible set");
    v.add(!b->in_domain(far) && b->in_domain(ref), "domain test");
    bool threw = false;
    try {
        (void)b->gradient(far);
    } catch (const DomainError&) {
        threw = true;
    }
    v.add(threw, "gradient outside the domain raises a domain error");
    v.add(std::abs(barrier_ell(BarrierKind::neg_log, 0.5) + std::log(0.5)) < 1e-15 &&
              std::abs(barrier_ell(BarrierKind::entropic, 0.5) - 0.5 * std::log(0.5)) < 1e-15,
          "ell values");
    return v;
}

Verdict check_metric() {
    Verdict v;
    std::mt19937_64 rng(10010);
    Bound fisher("kakade metric vs Fisher oracle", 1e-9);
    Bound psd("most negative metric eigenvalue (relative)", 1e-10);
    Bound sym("metric asymmetry", 0.0);
    for (int trial = 0; trial < 20; ++trial) {
        const Cmp cmp = orc::random_cmp(rng, draw(rng, 1, 4), draw(rng, 2, 3), 0.9);
        const Matrix probs = orc::softmax_rows(orc::random_logits(rng, cmp.n_states(), cmp.n_actions()));
        const auto pi = TabularPolicy::from_probs(probs);
        const Vector d = orc::state_sums(orc::forward_occupancy(cmp, probs), cmp.n_actions());
        const Matrix g = hessian_metric(cmp, pi, *kakade_potential(cmp.n_actions())).matrix;
        fisher.observe(rel(g, fisher_oracle(probs, d), 1e-8));
        for (const auto& phi : {kakade_potential(cmp.n_actions()), fisher_rao_potential()}) {
            const Matrix m = hessian_metric(cmp, pi, *phi).matrix;
            sym.observe((m - m.transpose()).cwiseAbs().maxCoeff());
            const Eigen::SelfAdjointEigenSolver<Matrix> es(m);
            psd.observe(-es.eigenvalues().minCoeff() / std::max(1e-300, es.eigenvalues().cwiseAbs().maxCoeff()));
        }
    }
    v.add(fisher);
    v.add(psd);
    v.add(sym);
    return v;
}

Verdict check_ctrpo() {
    Verdict v;
    const double d = ctrpo_divergence(0.5, 1.0, 0.0, 1.0, BarrierKind::neg_log);
    v.add(std::abs(d - 0.1931) < 5e-5, "worked example " + sci(d));
    v.add(ctrpo_divergence(0.0, 1.0, 0.37, 1.0, BarrierKind::neg_log) == 0.37, "zero cost advantage leaves the KL");
    bool nonneg = true;
    for (auto ell : {BarrierKind::neg_log, BarrierKind::entropic})
        for (double a : {-0.5, -0.1, 0.1, 0.5, 0.9}) nonneg = nonneg && ctrpo_divergence(a, 1.0, 0.0, 1.0, ell) >= 0.0;
    v.add(nonneg, "nonnegative on both sides");
    return v;
}

// --------------------------------------------------------------------------------------- optimizers

Verdict check_utility_gradient() {
    Verdict v;
    std::mt19937_64 rng(11011);
    Bound bound("exact utility gradient vs finite differences", 1e-5);
    std::string worst_label;
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const Cmp cmp = orc::random_cmp(rng, draw(rng, 2, 4), draw(rng, 2, 3), std::array{0.5, 0.9}[trial % 2]);
        const std::vector<Matrix> thetas{orc::random_logits(rng, cmp.n_states(), cmp.n_actions()),
                                         orc::random_logits(rng, cmp.n_states(), cmp.n_actions())};
        for (const auto& u : shipped_utilities(rng, cmp)) {
            const std::vector<Matrix> th(thetas.begin(), thetas.begin() + static_cast<long>(u.components));
            std::vector<TabularPolicy> pis;
            for (const auto& t : th) pis.push_back(policy_from_logits(t));
            const Vector z = Vector::Constant(static_cast<Eigen::Index>(u.components), 1.0 / u.components);
            const UtilityGradient g = utility_gradient(cmp, PolicyMixture(pis, z), *u.f);
            for (std::size_t i = 0; i < u.components; ++i) {
                const auto value = [&](const Vector& x) { return utility_through_oracle(cmp, *u.f, th, z, i, x); };
                const double e = rel(g.components[i], orc::fd_gradient(value, orc::flatten_rows(th[i])), 1e-6);
                bound.observe(e);
                if (e > worst) {
                    worst = e;
                    worst_label = u.label;
                }
            }
        }
    }
    v.add(bound);
    v.add(true, "worst utility: " + worst_label);
    return v;
}

Verdict check_sampled_gradient() {
    Verdict v;
    const Cmp chain = build_two_state();
    Matrix logits(2, 2);
    logits << 0.4, -0.3, -0.8, 0.5;
    const PolicyMixture mix({policy_from_logits(logits)});
    for (const auto& f : std::vector<UtilityPtr>{linear_utility(vec({1.0, 0.2, -0.5, 0.3})),
                                                 entropy_utility(EntropyMode::state_action, 2)}) {
        const Vector exact = utility_gradient(chain, mix, *f).components[0];
        const Vector s = utility_gradient(chain, mix, *f, GradientMode::sampled, {100000, 0, 5}).components[0];
        const double cos = exact.dot(s) / (exact.norm() * s.norm());
        v.add(cos >= 0.99, f->name() + " cosine " + sci(cos) + " (min 0.99)");
    }
    return v;
}

Verdict check_vpg_rules() {
    Verdict v;
    std::mt19937_64 rng(12012);
    const Cmp cmp = orc::random_cmp(rng, 3, 2, 0.9);
    const Matrix theta = orc::random_logits(rng, 3, 2);
    OptimizerConfig config;
    config.kind = OptimizerKind::vpg;
    config.step_size = 0.3;
    config.dual_step_size = 0.5;
    const auto f = entropy_utility(EntropyMode::state_action, 2);
    {
        const Problem p = single_problem(cmp, f);
        const auto s1 = vpg_lagrangian_step(initial_state(p, {theta}, config), p, config);
        const Vector g = utility_gradient(cmp, PolicyMixture({policy_from_logits(theta)}), *f).components[0];
        v.add((flatten(s1.thetas[0]) - flatten(theta) - 0.3 * g).cwiseAbs().maxCoeff() < 1e-14,
              "no constraints: plain gradient step");
    }
    const auto js = js_to_reference(occupancy(cmp, policy_from_logits(theta)));
    {
        const Problem p = single_problem(cmp, f, {make_constraint(js, 0.1)});
        const auto s1 = vpg_lagrangian_step(initial_state(p, {theta}, config), p, config);
        v.add(s1.multipliers(0) == 0.0, "feasible: multiplier stays 0");
    }
    {
        const Problem p = single_problem(cmp, f, {make_constraint(js, -0.05)});
        const auto s0 = initial_state(p, {theta}, config);
        const auto s1 = vpg_lagrangian_step(s0, p, config);
        v.add(std::abs(s1.multipliers(0) - 0.5 * s0.constraint_values[0]) < 1e-15 && s1.multipliers(0) > 0.0,
              "violated: multiplier rises by eta_lambda g");
    }
    return v;
}

Verdict check_hpg_rules() {
    Verdict v;
    const Cmp chain = build_two_state();
    Matrix theta(2, 2);
    theta << 0.3, -0.2, 0.1, 0.6;
    const Vector r = vec({1.0, 0.0, 0.0, 0.5});
    const Problem p = single_problem(chain, linear_utility(r));
    const auto pi = policy_from_logits(theta);
    const Vector grad = utility_gradient(chain, PolicyMixture({pi}), *p.utility).components[0];
    {
        OptimizerConfig config;
        config.identity_metric = true;
        config.step_size = 0.2;
        const auto s1 = hpg_step(initial_state(p, {theta}, config), p, config);
        v.add((flatten(s1.thetas[0] - theta) - 0.2 * grad).cwiseAbs().maxCoeff() < 1e-14, "identity metric: gradient step");
    }
    {
        OptimizerConfig config;
        config.step_size = 0.0;
        v.add(hpg_step(initial_state(p, {theta}, config), p, config).thetas[0] == theta, "eta 0 keeps theta");
    }
    {
        const SuccessorRep sr = successor_representation(chain, pi);
        const Vector omega = occupancy_via_successor(chain, pi, sr);
        const Vector dir = hpg_direction(chain, pi, sr, omega, *kakade_potential(2), grad, 1e-8);
        const Vector d = orc::state_sums(orc::forward_occupancy(chain, pi.probs()), 2);
        const Vector npg = fisher_oracle(pi.probs(), d).completeOrthogonalDecomposition().pseudoInverse() * grad;
        const double gap = (dir - npg).cwiseAbs().maxCoeff();
        v.add(gap <= 1e-6, "kakade direction vs pseudo-inverse Fisher " + sci(gap) + " (tol 1e-6)");
    }
    {
        OptimizerConfig config;
        const Problem cp = single_problem(chain, linear_utility(r), {make_constraint(js_to_reference(occupancy(chain, pi)), 0.0)});
        bool threw = false;
        try {
            (void)hpg_step(initial_state(cp, {theta}, config), cp, config);
        } catch (const Error&) {
            threw = true;
        }
        v.add(threw, "infeasible start rejected");
    }
    return v;
}

Verdict check_hpg_monotone() {
    Verdict v;
    std::mt19937_64 rng(13013);
    const Cmp cmp = orc::random_cmp(rng, 4, 3, 0.9);
    const Problem p = single_problem(cmp, entropy_utility(EntropyMode::state_action, 3));
    OptimizerConfig config;
    config.step_size = 1e-3;
    auto s = initial_state(p, {orc::random_logits(rng, 4, 3, 2.0)}, config);
    double worst = 0.0;
    bool accepted = true;
    for (int k = 0; k < 200; ++k) {
        const auto next = hpg_step(s, p, config);
        accepted = accepted && next.last_step_accepted;
        worst = std::min(worst, next.utility - s.utility);
        s = next;
    }
    v.add(accepted && worst >= -1e-9, "largest decrease " + sci(-worst) + " over 200 steps (tol 1e-9)");
    return v;
}

Verdict check_proximal() {
    Verdict v;
    std::mt19937_64 rng(14014);
    const Cmp cmp = orc::random_cmp(rng, 3, 2, 0.9);
    const Matrix theta = orc::random_logits(rng, 3, 2);
    const Problem p = single_problem(cmp, entropy_utility(EntropyMode::state_action, 2));
    OptimizerConfig config;
    config.kind = OptimizerKind::proximal;
    config.step_size = 1e-9;
    const auto s1 = proximal_surrogate_step(initial_state(p, {theta}, config), p, config);
    const double moved = (policy_from_logits(s1.thetas[0]).probs() - policy_from_logits(theta).probs()).cwiseAbs().maxCoeff();
    v.add(moved <= 1e-6, "eta -> 0 keeps the policy (moved " + sci(moved) + ")");

    const Vector r = orc::random_vector(rng, 6);
    config.step_size = 5.0;
    config.inner_steps = 20;
    config.iterations = 400;
    const RunLog log = run_optimization(single_problem(cmp, linear_utility(r)), {Matrix::Zero(3, 2)}, config);
    const double opt = solve_linear_baseline(cmp, r).value;
    const double gap = std::abs(log.records.back().utility_bits - opt);
    v.add(gap <= 1e-3 * std::max(1.0, std::abs(opt)), "linear utility reaches the optimum (gap " + sci(gap) + ")");
    return v;
}

Verdict check_surrogate_equivalence() {
    Verdict v;
    std::mt19937_64 rng(15015);
    Bound grad("gradient gap", 1e-8);
    Bound hpmd("PMD regularizer Hessian gap", 1e-6);
    Bound hsurr("surrogate regularizer Hessian gap", 1e-6);
    for (int trial = 0; trial < 20; ++trial) {
        const Cmp cmp = orc::random_cmp(rng, 4, draw(rng, 2, 3), 0.9);
        const auto pi = policy_from_logits(orc::random_logits(rng, cmp.n_states(), cmp.n_actions()));
        const UtilityPtr f = trial % 2 == 0 ? UtilityPtr(linear_utility(orc::random_vector(rng, cmp.n_pairs())))
                                            : UtilityPtr(entropy_utility(EntropyMode::state_action, cmp.n_actions()));
        const EquivalenceReport rep = surrogate_equivalence_check(cmp, pi, *f);
        grad.observe(rep.gradient_gap);
        hpmd.observe(rep.pmd_hessian_gap);
        hsurr.observe(rep.surr_hessian_gap);
    }
    v.add(grad);
    v.add(hpmd);
    v.add(hsurr);
    return v;
}

Verdict check_linear_hpg() {
    Verdict v;
    std::mt19937_64 rng(16016);
    const auto start = std::chrono::steady_clock::now();
    int hits = 0;
    double worst = 0.0;
    Bound flow("flow residual of logged iterates", 1e-8);
    for (int seed = 0; seed < 20; ++seed) {
        const Cmp cmp = orc::random_cmp(rng, 5, 3, 0.9);
        const Vector r = orc::random_vector(rng, cmp.n_pairs(), 0.0, 1.0);
        OptimizerConfig config;
        config.step_size = 1.0;
        config.iterations = 500;
        const RunLog log = run_optimization(single_problem(cmp, linear_utility(r)), {Matrix::Zero(5, 3)}, config);
        for (const auto& rec : log.records) flow.observe(rec.flow_residual);
        const double opt = solve_linear_baseline(cmp, r).value;
        const double gap = std::abs(log.records.back().utility_bits - opt) / std::abs(opt);
        worst = std::max(worst, gap);
        if (gap <= 1e-3) ++hits;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    v.add(hits >= 19, std::to_string(hits) + "/20 within 1e-3 relative (worst " + sci(worst) + ")");
    v.add(flow);
    v.add(secs < 30.0, "runtime " + sci(secs) + " s (limit 30 s)");
    return v;
}

/// Brute-force maximum of a chain utility over (π(stay|s0), π(stay|s1)) with a zooming 101×101 grid.
double grid_maximum(const Cmp& chain, const std::function<double(const Vector&)>& g) {
    double best = -kInf;
    double b0 = 0.5;
    double b1 = 0.5;
    double lo0 = 0.0, hi0 = 1.0, lo1 = 0.0, hi1 = 1.0;
    for (int round = 0; round <= 8; ++round) {
        for (int i = 0; i <= 100; ++i) {
            for (int j = 0; j <= 100; ++j) {
                const double p0 = lo0 + (hi0 - lo0) * i / 100.0;
                const double p1 = lo1 + (hi1 - lo1) * j / 100.0;
                Matrix probs(2, 2);
                probs << p0, 1.0 - p0, p1, 1.0 - p1;
                const double val = g(orc::forward_occupancy(chain, probs));
                if (val > best) {
                    best = val;
                    b0 = p0;
                    b1 = p1;
                }
            }
        }
        const double w0 = (hi0 - lo0) / 10.0;
        const double w1 = (hi1 - lo1) / 10.0;
        lo0 = std::max(0.0, b0 - w0);
        hi0 = std::min(1.0, b0 + w0);
        lo1 = std::max(0.0, b1 - w1);
        hi1 = std::min(1.0, b1 + w1);
    }
    return best;
}

Verdict check_maxent_two_state() {
    Verdict v;
    const auto start = std::chrono::steady_clock::now();
    const ExperimentConfig config = preset("twostate_fig3");
    const BuiltExperiment built = build_experiment(config);
    const auto& h = *built.problem.utility;
    const double best = h.to_report(grid_maximum(built.problem.cmp, [&](const Vector& w) { return h.value(w); }));
    const auto logs = run_experiment(config);
    double vpg = 0.0;
    double hpg = 0.0;
    for (const auto& log : logs) (log.optimizer == "vpg" ? vpg : hpg) = log.records.back().utility_bits;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    v.add(std::abs(hpg - best) <= 0.01, "HPG " + sci(hpg) + " bits vs grid maximum " + sci(best) + " (tol 0.01)");
    v.add(best - vpg > 0.01, "VPG not yet converged at the budget (" + sci(vpg) + " bits)");
    v.add(hpg >= vpg, "HPG >= VPG");
    v.add(secs < 30.0, "runtime " + sci(secs) + " s (limit 30 s)");
    return v;
}

// ---------------------------------------------------------------------------------------------- envs

Verdict check_gridworld() {
    Verdict v;
    GridSpec spec;
    spec.slip = 0.1;
    const Cmp cmp = build_gridworld(spec);
    bool ok = validate_cmp(cmp).empty();
    for (int s = 0; s < cmp.n_states(); ++s) {
        const int row = s / spec.width;
        const int col = s % spec.width;
        for (int a = 0; a < kGridActions; ++a) {
            for (int sp = 0; sp < cmp.n_states(); ++sp) {
                if (cmp.transition(s, a, sp) == 0.0) continue;
                const int dist = std::abs(sp / spec.width - row) + std::abs(sp % spec.width - col);
                ok = ok && dist <= 1;
            }
        }
    }
    v.add(ok, "slip kernel is stochastic and only reaches neighbours");
    const Cmp det = build_gridworld(GridSpec{});
    v.add(det.transition(0, kUp, 0) == 1.0 && det.transition(0, kRight, 1) == 1.0 && det.transition(0, kDown, 5) == 1.0,
          "deterministic moves, walls keep the agent in place");
    GridSpec bad;
    bad.red_cells.push_back(bad.green_cells.front());
    v.add(!validate_grid(bad).empty(), "overlapping cells rejected");
    return v;
}

Verdict check_expert() {
    Verdict v;
    const GridSpec spec;
    const Cmp cmp = build_gridworld(spec);
    const auto pi = build_expert_policy(cmp, spec);
    const Vector d = orc::state_sums(orc::forward_occupancy(cmp, pi.probs()), kGridActions);
    double green = 0.0;
    double red = 0.0;
    for (const auto& c : spec.green_cells) green += d(c.first * spec.width + c.second);
    for (const auto& c : spec.red_cells) red += d(c.first * spec.width + c.second);
    v.add(pi.interior(), "expert is interior");
    v.add(green >= 2.0 * red, "green mass " + sci(green) + " vs red " + sci(red));
    GridSpec hot = spec;
    hot.temperature = 1e12;
    v.add((build_expert_policy(cmp, hot).probs().array() - 0.2).abs().maxCoeff() < 1e-9, "high temperature is uniform");
    return v;
}

Verdict check_two_state() {
    Verdict v;
    const Cmp half = build_two_state({0.5, 1.0});
    const Vector d = orc::state_sums(occupancy(half, deterministic_policy(half, {kSwitchAction, kSwitchAction})).values(), 2);
    v.add(std::abs(d(0) - 2.0 / 3.0) < 1e-12 && std::abs(d(1) - 1.0 / 3.0) < 1e-12, "always switch alternates");
    const Cmp chain = build_two_state();
    const Vector s = orc::state_sums(occupancy(chain, deterministic_policy(chain, {kStayAction, kStayAction})).values(), 2);
    v.add(std::abs(s(0) - 1.0) < 1e-12, "always stay keeps the start state");
    return v;
}

// ------------------------------------------------------------------------------------------- harness

Verdict check_config_round_trip() {
    Verdict v;
    for (const auto& name : preset_names()) {
        const ExperimentConfig c = preset(name);
        const nlohmann::json j = to_json(c);
        const nlohmann::json again = to_json(parse_config(nlohmann::json::parse(j.dump())));
        v.add(j == again, name + " round trips");
    }
    bool rejected = false;
    try {
        nlohmann::json j = to_json(preset("twostate_fig3"));
        j["utility"]["kind"] = "banana";
        (void)parse_config(j);
    } catch (const ConfigError&) {
        rejected = true;
    }
    v.add(rejected, "unknown utility kind rejected");
    return v;
}

std::string csv_of(const RunLog& log) {
    std::ostringstream os;
    log.write_csv(os);
    return os.str();
}

Verdict check_determinism() {
    Verdict v;
    ExperimentConfig config = preset("twostate_fig3");
    for (auto& run : config.compare) run.iterations = 20;
    const auto a = run_experiment(config);
    const auto b = run_experiment(config);
    bool same = a.size() == b.size();
    for (std::size_t i = 0; same && i < a.size(); ++i) same = csv_of(a[i]) == csv_of(b[i]);
    std::ostringstream pa;
    std::ostringstream pb;
    emit_plotdata(pa, a);
    emit_plotdata(pb, b);
    v.add(same && pa.str() == pb.str(), "exact runs byte-identical");

    for (auto& run : config.compare) {
        run.mode = GradientMode::sampled;
        run.sampling.n_traj = 200;
        run.iterations = 3;
    }
    const auto sa = run_experiment(config);
    const auto sb = run_experiment(config);
    v.add(csv_of(sa[0]) == csv_of(sb[0]) && csv_of(sa[1]) == csv_of(sb[1]), "sampled runs byte-identical");
    std::size_t rows = 0;
    for (const auto& log : a) rows += log.records.size();
    const std::string plot = pa.str();
    v.add(static_cast<std::size_t>(std::count(plot.begin(), plot.end(), '\n')) == rows + 1, "plot data has one row per record");
    return v;
}

Verdict check_gridworld_experiment() {
    Verdict v;
    const auto start = std::chrono::steady_clock::now();
    const ExperimentConfig config = preset("gridworld_fig2");
    const auto logs = run_experiment(config);
    const RunLog* hpg = nullptr;
    const RunLog* vpg = nullptr;
    for (const auto& log : logs) (log.optimizer == "hpg" ? hpg : vpg) = &log;
    const double threshold = config.constraints.front().threshold_bits;
    bool all_feasible = true;
    for (const auto& rec : hpg->records)
        for (double g : rec.constraint_bits) all_feasible = all_feasible && g < 0.0;
    const auto& last = hpg->records.back();
    double worst_js = 0.0;
    for (double g : last.constraint_bits) worst_js = std::max(worst_js, g + threshold);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    v.add(all_feasible, "every HPG iterate strictly feasible");
    v.add(worst_js <= threshold + 0.005, "final JS " + sci(worst_js) + " bits (limit " + sci(threshold + 0.005) + ")");
    v.add(last.utility_bits > 0.0, "final MI " + sci(last.utility_bits) + " bits");
    v.add(last.utility_bits >= vpg->records.back().utility_bits,
          "MI(HPG) >= MI(VPG) = " + sci(vpg->records.back().utility_bits));
    v.add(secs <= 300.0, "runtime " + sci(secs) + " s (limit 300 s)");
    return v;
}

CheckSpec spec(std::string name, std::string description, Verdict (*fn)()) {
    return CheckSpec{name, std::move(description), [name, fn] {
                         CheckResult r;
                         r.name = name;
                         const auto start = std::chrono::steady_clock::now();
                         try {
                             const Verdict v = fn();
                             r.passed = v.ok();
                             r.detail = v.detail();
                         } catch (const std::exception& e) {
                             r.passed = false;
                             r.detail = std::string("exception: ") + e.what();
                         }
                         r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                         return r;
                     }};
}

}  // namespace

const std::vector<CheckSpec>& check_registry() {
    static const std::vector<CheckSpec> registry{
        spec("cmp.validation", "malformed kernels, initial distributions and discounts are rejected", check_cmp_validation),
        spec("cmp.softmax", "softmax is shift invariant, overflow safe and matches a direct evaluation", check_cmp_softmax),
        spec("cmp.round_trips", "JSON and occupancy-conditioning round trips", check_cmp_round_trips),
        spec("occupancy.random_cmps", "flow, SR vs direct solve, forward propagation, Neumann bound on 100 random CMPs",
             check_occupancy_random),
        spec("occupancy.examples", "closed-form occupancies, flow residual and truncation horizon", check_occupancy_examples),
        spec("occupancy.monte_carlo", "discounted Monte Carlo sums match <f, omega> within 3 SE", check_occupancy_monte_carlo),
        spec("occupancy.sampler", "sampled occupancy is consistent and seed deterministic", check_occupancy_sampler),
        spec("occupancy.jacobian", "occupancy Jacobian vs finite differences; the scaling constant is 1",
             check_occupancy_jacobian),
        spec("occupancy.advantage", "advantages are policy centred and Q solves the Bellman equation",
             check_occupancy_advantage),
        spec("occupancy.value_iteration", "value iteration matches enumeration of deterministic policies",
             check_value_iteration),
        spec("utilities.differentials", "differentials and Hessians vs finite differences along the flow polytope",
             check_utility_differentials),
        spec("utilities.entropy", "entropy values in bits and bounds", check_entropy_examples),
        spec("utilities.jensen_bregman", "dispersion equals the mean Bregman divergence to the mixture; MI identities",
             check_jensen_bregman),
        spec("utilities.js", "Jensen-Shannon symmetry, bounds and KL oracle", check_js),
        spec("utilities.constraints", "constraint values and units", check_constraints),
        spec("geometry.bregman", "Bregman divergences of the Fisher-Rao and kakade potentials", check_bregman),
        spec("geometry.potential_derivatives", "potential gradients and Hessians vs finite differences",
             check_potential_derivatives),
        spec("geometry.barrier_domain", "barrier potentials are infinite outside the feasible set", check_barrier_domain),
        spec("geometry.metric", "pulled-back metrics are symmetric PSD; kakade gives the Fisher matrix", check_metric),
        spec("geometry.ctrpo", "C-TRPO divergence worked example and sign", check_ctrpo),
        spec("optimizers.utility_gradient", "exact policy gradient vs finite differences for every utility",
             check_utility_gradient),
        spec("optimizers.sampled_gradient", "sampled gradient has cosine >= 0.99 with the exact one", check_sampled_gradient),
        spec("optimizers.vpg_rules", "Lagrangian step and projected dual ascent", check_vpg_rules),
        spec("optimizers.hpg_rules", "HPG reductions, natural gradient direction, infeasible start", check_hpg_rules),
        spec("optimizers.hpg_monotone", "HPG ascends at small steps", check_hpg_monotone),
        spec("optimizers.proximal", "proximal surrogate anchor and linear optimum", check_proximal),
        spec("optimizers.surrogate_equivalence", "mirror descent and surrogate objectives agree to first order",
             check_surrogate_equivalence),
        spec("optimizers.linear_hpg", "HPG reaches the value-iteration optimum on random 5-state MDPs", check_linear_hpg),
        spec("optimizers.maxent_two_state", "HPG reaches the entropy maximum of the two-state chain and beats VPG",
             check_maxent_two_state),
        spec("envs.gridworld", "gridworld kernels and validation", check_gridworld),
        spec("envs.expert", "expert policy favours green cells", check_expert),
        spec("envs.two_state", "two-state chain closed forms", check_two_state),
        spec("harness.config_round_trip", "configs round trip and unknown kinds are rejected", check_config_round_trip),
        spec("harness.determinism", "identical config and seed give byte-identical logs", check_determinism),
        spec("harness.gridworld_experiment", "constrained diversity: barrier HPG stays feasible and beats VPG",
             check_gridworld_experiment),
    };
    return registry;
}

bool run_checks(std::ostream& os, const std::string& filter) {
    int passed = 0;
    int failed = 0;
    for (const auto& c : check_registry()) {
        if (!filter.empty() && c.name.find(filter) == std::string::npos) continue;
        const CheckResult r = c.run();
        (r.passed ? passed : failed) += 1;
        char secs[16];
        std::snprintf(secs, sizeof(secs), "%.2fs", r.seconds);
        os << (r.passed ? "PASS " : "FAIL ") << r.name << " [" << secs << "] " << r.detail << std::endl;
    }
    os << passed << " passed, " << failed << " failed" << std::endl;
    return failed == 0 && passed > 0;
}

}  // namespace nmdp
