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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nmdp/occupancy.hpp"
#include "test_support.hpp"

#include <sstream>

using namespace nmdp;
namespace nt = nmdp::testing;

namespace {

Cmp single_state(int na, double gamma) {
    Matrix k = Matrix::Ones(na, 1);
    Vector mu = Vector::Ones(1);
    return Cmp(1, na, k, mu, gamma);
}

Matrix uniform_probs(int ns, int na) { return Matrix::Constant(ns, na, 1.0 / na); }

}  // namespace

TEST_CASE("two-state chain occupancy at gamma 0.5") {
    const Cmp chain = nt::two_state_chain(0.5);
    const auto pi = TabularPolicy::uniform(2, 2);
    Vector expected(4);
    expected << 0.375, 0.375, 0.125, 0.125;
    const Occupancy omega = occupancy(chain, pi);
    CHECK((omega.values() - expected).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((nt::forward_occupancy(chain, pi.probs()) - expected).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(bellman_flow_residual(chain, omega.values()) <= 1e-10);
}

TEST_CASE("occupancy degenerate cases") {
    SUBCASE("gamma 0 gives mu times pi") {
        std::mt19937_64 rng(5);
        const Cmp cmp = nt::random_cmp(rng, 4, 3, 0.0);
        const auto pi = policy_from_logits(nt::random_logits(rng, 4, 3));
        const Vector omega = occupancy(cmp, pi).values();
        for (int s = 0; s < 4; ++s)
            for (int a = 0; a < 3; ++a) CHECK(std::abs(omega(cmp.index(s, a)) - cmp.mu()(s) * pi.prob(s, a)) < 1e-15);
    }
    SUBCASE("single state gives pi") {
        for (double gamma : {0.0, 0.5, 0.99}) {
            Matrix l(1, 3);
            l << 0.3, -1.0, 2.0;
            const auto pi = policy_from_logits(l);
            const Vector omega = occupancy(single_state(3, gamma), pi).values();
            CHECK((omega - pi.flat_probs()).cwiseAbs().maxCoeff() < 1e-14);
        }
    }
}

TEST_CASE("successor representation examples") {
    SUBCASE("gamma 0 is the identity") {
        std::mt19937_64 rng(1);
        const Cmp cmp = nt::random_cmp(rng, 3, 2, 0.0);
        const auto sr = successor_representation(cmp, TabularPolicy::uniform(3, 2));
        CHECK(sr.matrix.isIdentity(0.0));
    }
    SUBCASE("absorbing state gives 1/(1-gamma)") {
        const auto sr = successor_representation(single_state(1, 0.5), TabularPolicy::uniform(1, 1));
        REQUIRE(sr.matrix.rows() == 1);
        CHECK(sr.matrix(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
    }
    SUBCASE("two-state chain matches 60 Neumann terms") {
        const Cmp chain = nt::two_state_chain(0.5);
        const auto sr = successor_representation(chain, TabularPolicy::uniform(2, 2));
        CHECK((sr.matrix - nt::neumann_successor(chain, uniform_probs(2, 2), 60)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("successor representation satisfies the backward equation and the Neumann bound") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const int ns = 1 + static_cast<int>(rng() % 5);
        const int na = 1 + static_cast<int>(rng() % 4);
        const double gamma = std::array{0.0, 0.5, 0.9, 0.99}[trial % 4];
        const Cmp cmp = nt::random_cmp(rng, ns, na, gamma, trial % 2 == 1);
        const Matrix probs = nt::softmax_rows(nt::random_logits(rng, ns, na));
        const auto pi = TabularPolicy::from_probs(probs);
        const Matrix m = successor_representation(cmp, pi).matrix;
        const Matrix p = pair_transition_matrix(cmp, pi);
        const Matrix id = Matrix::Identity(m.rows(), m.cols());
        CHECK((m - id - gamma * m * p.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, m.cwiseAbs().maxCoeff()));
        CHECK(m.minCoeff() >= -1e-12);
        CHECK(m.maxCoeff() <= 1.0 / (1.0 - gamma) + 1e-9);
        for (int t : {0, 5, 20, 80}) {
            const Matrix n = nt::neumann_successor(cmp, probs, t);
            const double bound = std::pow(gamma, t + 1) / (1.0 - gamma);
            // row sums of the pair kernel are 1, so the induced sup norm of the tail is the bound
            CHECK((m.transpose() - n.transpose()).rowwise().lpNorm<1>().maxCoeff() <= bound + 1e-9);
        }
    }
}

TEST_CASE("occupancy on random CMPs: flow, mass, two routes") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const int ns = 1 + static_cast<int>(rng() % 8);
        const int na = 1 + static_cast<int>(rng() % 8);
        const double gamma = std::array{0.0, 0.5, 0.9, 0.99}[trial % 4];
        const Cmp cmp = nt::random_cmp(rng, ns, na, gamma, trial % 3 == 0);
        const auto pi = policy_from_logits(nt::random_logits(rng, ns, na, 1.5));
        const Occupancy omega = occupancy(cmp, pi);
        CHECK(check_distribution(omega.values(), 1e-10).empty());
        CHECK(bellman_flow_residual(cmp, omega.values()) <= 1e-9);
        const Vector via_sr = occupancy_via_successor(cmp, pi, successor_representation(cmp, pi));
        const Vector via_flow = occupancy_via_flow(cmp, pi);
        CHECK((via_sr - via_flow).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((nt::forward_occupancy(cmp, pi.probs()) - via_flow).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("bellman_flow_residual and mass_residual") {
    const Cmp chain = nt::two_state_chain(0.5);
    CHECK(bellman_flow_residual(chain, Vector::Constant(4, 0.25)) == doctest::Approx(0.25).epsilon(1e-14));
    Vector w(4);
    w << 0.375, 0.375, 0.125, 0.125;
    CHECK(mass_residual(w) < 1e-15);
    CHECK(mass_residual(2.0 * w) == doctest::Approx(1.0));
    CHECK_THROWS_AS(bellman_flow_residual(chain, Vector::Zero(3)), Error);
    // flow matrix form agrees with the pointwise definition
    const Vector lhs = chain.flow_matrix() * Vector::Constant(4, 0.25) - (1.0 - chain.gamma()) * chain.mu();
    CHECK(lhs.cwiseAbs().maxCoeff() == doctest::Approx(0.25));
}

TEST_CASE("occupancy Jacobian matches finite differences with constant 1") {
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 20; ++trial) {
        const int ns = 1 + static_cast<int>(rng() % 5);
        const int na = 2 + static_cast<int>(rng() % 3);
        const double gamma = std::array{0.0, 0.5, 0.9, 0.99}[trial % 4];
        const Cmp cmp = nt::random_cmp(rng, ns, na, gamma);
        const Matrix logits = nt::random_logits(rng, ns, na);
        const auto f = [&](const Vector& th) {
            return nt::forward_occupancy(cmp, nt::softmax_rows(nt::unflatten_rows(th, ns, na)));
        };
        const Matrix fd = nt::fd_jacobian(f, nt::flatten_rows(logits));
        const Matrix jac = occupancy_jacobian(cmp, policy_from_logits(logits)).matrix;
        CHECK(nt::rel_err(jac, fd) <= 1e-5);
        // the rejected scalings are far off whenever γ > 0
        if (gamma > 0.0) {
            CHECK(nt::rel_err((1.0 - gamma) * jac, fd) > 1e-2);
            CHECK(nt::rel_err(jac / (1.0 - gamma), fd) > 1e-2);
        }
        CHECK(jac.colwise().sum().cwiseAbs().maxCoeff() <= 1e-9);
        CHECK((cmp.flow_matrix() * jac).cwiseAbs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("occupancy Jacobian closed forms") {
    SUBCASE("single state is the softmax Jacobian") {
        Matrix l(1, 3);
        l << 0.2, -0.4, 1.0;
        const auto pi = policy_from_logits(l);
        const Matrix jac = occupancy_jacobian(single_state(3, 0.7), pi).matrix;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                CHECK(std::abs(jac(a, b) - pi.prob(0, a) * ((a == b ? 1.0 : 0.0) - pi.prob(0, b))) < 1e-14);
    }
    SUBCASE("gamma 0 has no dynamics") {
        std::mt19937_64 rng(8);
        const Cmp cmp = nt::random_cmp(rng, 3, 2, 0.0);
        const auto pi = policy_from_logits(nt::random_logits(rng, 3, 2));
        const Matrix jac = occupancy_jacobian(cmp, pi).matrix;
        for (int s = 0; s < 3; ++s)
            for (int a = 0; a < 2; ++a)
                for (int sp = 0; sp < 3; ++sp)
                    for (int b = 0; b < 2; ++b) {
                        const double expected =
                            s == sp ? cmp.mu()(s) * pi.prob(s, a) * ((a == b ? 1.0 : 0.0) - pi.prob(s, b)) : 0.0;
                        CHECK(std::abs(jac(cmp.index(s, a), cmp.index(sp, b)) - expected) < 1e-15);
                    }
    }
    SUBCASE("two-state chain, uniform policy") {
        const Cmp chain = nt::two_state_chain(0.5);
        const auto f = [&](const Vector& th) { return nt::forward_occupancy(chain, nt::softmax_rows(nt::unflatten_rows(th, 2, 2))); };
        const Matrix fd = nt::fd_jacobian(f, Vector::Zero(4));
        CHECK((occupancy_jacobian(chain, TabularPolicy::uniform(2, 2)).matrix - fd).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("advantage_for_reward") {
    std::mt19937_64 rng(17);
    const Cmp cmp = nt::random_cmp(rng, 4, 3, 0.9);
    const auto pi = policy_from_logits(nt::random_logits(rng, 4, 3));
    SUBCASE("zero reward") {
        const auto adv = advantage_for_reward(cmp, pi, Vector::Zero(12));
        CHECK(adv.q.isZero(0.0));
        CHECK(adv.v.isZero(0.0));
        CHECK(adv.a.isZero(0.0));
    }
    SUBCASE("constant reward") {
        const auto adv = advantage_for_reward(cmp, pi, Vector::Constant(12, 3.0));
        CHECK((adv.q.array() - 30.0).abs().maxCoeff() < 1e-10);
        CHECK(adv.a.cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("policy-weighted advantage vanishes and Q satisfies the Bellman equation") {
        const Vector r = nt::random_vector(rng, 12);
        const auto adv = advantage_for_reward(cmp, pi, r);
        for (int s = 0; s < 4; ++s) {
            double acc = 0.0;
            for (int a = 0; a < 3; ++a) acc += pi.prob(s, a) * adv.a(cmp.index(s, a));
            CHECK(std::abs(acc) <= 1e-12);
        }
        const Vector bellman = r + cmp.gamma() * cmp.kernel() * adv.v;
        CHECK((adv.q - bellman).cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("dominant action keeps relative accuracy") {
        // bandit at gamma 0: A(dominant) = π(other)·(r0 − r1), far below the rounding error of Q − V
        const Cmp bandit(1, 2, Matrix::Ones(2, 1), Vector::Ones(1), 0.0);
        Matrix l(1, 2);
        l << 30.0, 0.0;
        Vector r(2);
        r << 1.0, 0.0;
        const auto adv = advantage_for_reward(bandit, policy_from_logits(l), r);
        const double other = 1.0 / (1.0 + std::exp(30.0));
        CHECK(std::abs(adv.a(0) - other) <= 1e-12 * other);
    }
}

TEST_CASE("advantage Q agrees with Monte-Carlo returns") {
    const Cmp chain = nt::two_state_chain(0.5);
    const auto pi = TabularPolicy::uniform(2, 2);
    Vector r(4);
    r << 1, 1, 0, 0;
    const auto adv = advantage_for_reward(chain, pi, r);
    // start from s0 (μ = δ_s0): E[Σ γ^t r] = V(s0) = (1−γ)^{-1}·⟨r, ω⟩
    const auto est = discounted_expectation(chain, pi, r, 100000, truncation_horizon(0.5), 42);
    CHECK(std::abs(est.mean / (1.0 - 0.5) - adv.v(0)) <= 3.0 * est.standard_error / (1.0 - 0.5));
}

TEST_CASE("sample_occupancy") {
    SUBCASE("degenerate chain has zero variance") {
        const auto est = sample_occupancy(single_state(1, 0.9), TabularPolicy::uniform(1, 1), 50, truncation_horizon(0.9), 3);
        CHECK(std::abs(est.mean(0) - (1.0 - est.truncation_bias)) < 1e-12);
        CHECK(est.standard_error(0) == 0.0);
        CHECK(est.truncation_bias <= 1e-8);
    }
    SUBCASE("two-state chain within 3 standard errors") {
        const Cmp chain = nt::two_state_chain(0.5);
        const auto pi = TabularPolicy::uniform(2, 2);
        const auto est = sample_occupancy(chain, pi, 100000, truncation_horizon(0.5), 2024);
        const Vector exact = occupancy(chain, pi).values();
        for (int i = 0; i < 4; ++i) CHECK(std::abs(est.mean(i) - exact(i)) <= 3.0 * est.standard_error(i) + est.truncation_bias);
        CHECK(est.env_steps == 100000LL * est.horizon);
    }
    SUBCASE("gamma 0 is the empirical first-pair frequency") {
        const Cmp chain = nt::two_state_chain(0.0);
        const auto est = sample_occupancy(chain, TabularPolicy::uniform(2, 2), 1000, truncation_horizon(0.0), 9);
        CHECK(est.horizon == 1);
        const double k = est.mean(0) * 1000.0;
        CHECK(std::abs(k - std::round(k)) < 1e-9);
        CHECK(est.mean(0) + est.mean(1) == doctest::Approx(1.0));
        CHECK(est.mean(2) == 0.0);
    }
    SUBCASE("deterministic given the seed") {
        const Cmp chain = nt::two_state_chain(0.9);
        const auto a = sample_occupancy(chain, TabularPolicy::uniform(2, 2), 500, truncation_horizon(0.9), 77);
        const auto b = sample_occupancy(chain, TabularPolicy::uniform(2, 2), 500, truncation_horizon(0.9), 77);
        const auto c = sample_occupancy(chain, TabularPolicy::uniform(2, 2), 500, truncation_horizon(0.9), 78);
        CHECK(a.mean == b.mean);
        CHECK(a.mean != c.mean);
    }
}

TEST_CASE("discounted expectation matches the inner product for bounded f") {
    const Cmp chain = nt::two_state_chain(0.9);
    std::mt19937_64 rng(31);
    const auto pi = policy_from_logits(nt::random_logits(rng, 2, 2));
    const Vector omega = occupancy(chain, pi).values();
    int inside = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const Vector f = nt::random_vector(rng, 4);
        const auto est = discounted_expectation(chain, pi, f, 20000, truncation_horizon(0.9), 1000 + trial);
        if (std::abs(est.mean - f.dot(omega)) <= 3.0 * est.standard_error + 1e-8) ++inside;
    }
    CHECK(inside >= 9);
}

TEST_CASE("truncation_horizon") {
    CHECK(truncation_horizon(0.0) == 1);
    CHECK(truncation_horizon(0.5) == 27);
    CHECK(std::pow(0.9, truncation_horizon(0.9)) <= 1e-8);
    CHECK(std::pow(0.9, truncation_horizon(0.9) - 1) > 1e-8);
}

TEST_CASE("solve_linear_baseline") {
    SUBCASE("zero reward breaks ties to action 0") {
        std::mt19937_64 rng(2);
        const auto sol = solve_linear_baseline(nt::random_cmp(rng, 3, 3, 0.9), Vector::Zero(9));
        CHECK(sol.value == 0.0);
        CHECK(sol.policy == std::vector<int>{0, 0, 0});
    }
    SUBCASE("bandit picks the argmax") {
        Vector r(3);
        r << 0.1, 0.7, 0.3;
        const auto sol = solve_linear_baseline(single_state(3, 0.5), r);
        CHECK(sol.policy == std::vector<int>{1});
        CHECK(sol.value == doctest::Approx(0.7).epsilon(1e-12));
    }
    SUBCASE("two-state chain stays in s0") {
        Vector r(4);
        r << 1, 1, 0, 0;
        const Cmp chain = nt::two_state_chain(0.5);
        const auto sol = solve_linear_baseline(chain, r);
        CHECK(sol.policy[0] == 0);
        CHECK(std::abs(sol.value - 1.0) < 1e-12);
        // exhaustive enumeration of the deterministic policies
        double best = -1.0;
        for (int a0 = 0; a0 < 2; ++a0)
            for (int a1 = 0; a1 < 2; ++a1)
                best = std::max(best, r.dot(nt::forward_occupancy(chain, deterministic_policy(chain, {a0, a1}).probs())));
        CHECK(std::abs(sol.value - best) < 1e-12);
    }
    SUBCASE("random MDPs agree with enumeration") {
        std::mt19937_64 rng(55);
        for (int trial = 0; trial < 10; ++trial) {
            const Cmp cmp = nt::random_cmp(rng, 3, 2, 0.9);
            const Vector r = nt::random_vector(rng, 6);
            double best = -1e9;
            for (int code = 0; code < 8; ++code) {
                const std::vector<int> acts{code & 1, (code >> 1) & 1, (code >> 2) & 1};
                best = std::max(best, r.dot(nt::forward_occupancy(cmp, deterministic_policy(cmp, acts).probs())));
            }
            CHECK(std::abs(solve_linear_baseline(cmp, r).value - best) < 1e-10);
        }
    }
}

TEST_CASE("occupancy CSV") {
    const Cmp chain = nt::two_state_chain(0.5);
    std::ostringstream os;
    write_occupancy_csv(os, chain, occupancy(chain, TabularPolicy::uniform(2, 2)).values());
    CHECK(os.str() == "s,a,omega\n0,0,0.375\n0,1,0.375\n1,0,0.125\n1,1,0.125\n");
}
