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

// Release acceptance: one PASS/FAIL line per criterion. Every quantity is compared against an
// oracle from test_support.hpp, never against the code path that produced it.

#include "nmdp/harness.hpp"
#include "nmdp/geometry.hpp"
#include "nmdp/occupancy.hpp"
#include "nmdp/optimizers.hpp"
#include "nmdp/utilities.hpp"
#include "test_support.hpp"

#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#ifndef NMDP_CLI_PATH
#error "NMDP_CLI_PATH must name the nmdp executable"
#endif

using namespace nmdp;
namespace nt = nmdp::testing;
namespace fs = std::filesystem;

namespace {

constexpr double kLn2 = 0.69314718055994530942;

struct Outcome {
    bool passed = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        passed = passed && ok;
        if (!detail.empty()) detail += "; ";
        detail += what;
    }
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

int draw(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// ----------------------------------------------------------------------------------------- oracles

double kl_nats(const Vector& p, const Vector& q) {
    double out = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i)
        if (p(i) > 0.0) out += p(i) * std::log(p(i) / q(i));
    return out;
}

double js_bits(const Vector& p, const Vector& q) {
    const Vector m = 0.5 * (p + q);
    return (0.5 * kl_nats(p, m) + 0.5 * kl_nats(q, m)) / kLn2;
}

/// Σ_s weight(s) KL(p_s ‖ q_s) over policy rows.
double weighted_row_kl(const Vector& weight, const Matrix& p, const Matrix& q) {
    double out = 0.0;
    for (Eigen::Index s = 0; s < p.rows(); ++s) out += weight(s) * kl_nats(p.row(s).transpose(), q.row(s).transpose());
    return out;
}

Matrix fd_hessian(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
    const Eigen::Index n = x.size();
    Matrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            Vector pp = x, pm = x, mp = x, mm = x;
            pp(i) += h, pp(j) += h;
            pm(i) += h, pm(j) -= h;
            mp(i) -= h, mp(j) += h;
            mm(i) -= h, mm(j) -= h;
            out(i, j) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
        }
    }
    return out;
}

/// Best linear return over all deterministic policies, by enumeration.
double enumerate_linear_optimum(const Cmp& cmp, const Vector& r) {
    const int ns = cmp.n_states();
    const int na = cmp.n_actions();
    long total = 1;
    for (int s = 0; s < ns; ++s) total *= na;
    double best = -std::numeric_limits<double>::infinity();
    for (long code = 0; code < total; ++code) {
        Matrix probs = Matrix::Zero(ns, na);
        long c = code;
        for (int s = 0; s < ns; ++s, c /= na) probs(s, static_cast<int>(c % na)) = 1.0;
        best = std::max(best, r.dot(nt::forward_occupancy(cmp, probs)));
    }
    return best;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + NMDP_CLI_PATH + "\" " + args;
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---------------------------------------------------------------------------------------- criteria

Outcome occupancy_correctness() {
    Outcome o;
    std::mt19937_64 rng(90001);
    double flow = 0.0, routes = 0.0, neumann = 0.0;
    const auto start = Clock::now();
    for (int trial = 0; trial < 100; ++trial) {
        const double gamma = std::array{0.0, 0.5, 0.9, 0.99}[trial % 4];
        const Cmp cmp = nt::random_cmp(rng, draw(rng, 1, 8), draw(rng, 1, 8), gamma, trial % 3 == 0);
        const Matrix probs = nt::softmax_rows(nt::random_logits(rng, cmp.n_states(), cmp.n_actions()));
        const auto pi = TabularPolicy::from_probs(probs);
        const SuccessorRep sr = successor_representation(cmp, pi);
        const Vector via_sr = occupancy_via_successor(cmp, pi, sr);
        flow = std::max(flow, bellman_flow_residual(cmp, via_sr));
        routes = std::max(routes, (via_sr - occupancy_via_flow(cmp, pi)).cwiseAbs().maxCoeff());
        routes = std::max(routes, (via_sr - nt::forward_occupancy(cmp, probs)).cwiseAbs().maxCoeff());
        for (int t : {0, 2, 8}) {
            const Matrix n = nt::neumann_successor(cmp, probs, t);
            const double bound = std::pow(gamma, t + 1) / (1.0 - gamma);
            neumann = std::max(neumann, (sr.matrix.transpose() - n.transpose()).rowwise().lpNorm<1>().maxCoeff() - bound);
        }
    }
    const double secs = seconds_since(start);
    o.require(flow <= 1e-9, "flow residual " + num(flow) + " <= 1e-9");
    o.require(routes <= 1e-10, "SR vs direct " + num(routes) + " <= 1e-10");
    o.require(neumann <= 1e-9, "Neumann tail excess " + num(neumann) + " <= 1e-9");
    o.require(secs < 10.0, "runtime " + num(secs) + " s < 10 s");
    return o;
}

Outcome monte_carlo_sums() {
    Outcome o;
    const Cmp chain = nt::two_state_chain(0.9);
    std::mt19937_64 rng(90002);
    const auto start = Clock::now();
    int inside = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix probs = nt::softmax_rows(nt::random_logits(rng, 2, 2));
        const Vector f = nt::random_vector(rng, 4);
        const double exact = f.dot(nt::forward_occupancy(chain, probs));
        const ScalarEstimate est = discounted_expectation(chain, TabularPolicy::from_probs(probs), f, 100000,
                                                          truncation_horizon(chain.gamma()), 7000 + trial);
        const double z = std::abs(est.mean - exact) / est.standard_error;
        worst = std::max(worst, z);
        if (z <= 3.0) ++inside;
    }
    const double secs = seconds_since(start);
    o.require(inside == 10, std::to_string(inside) + "/10 within 3 SE (worst " + num(worst) + ")");
    o.require(secs < 60.0, "runtime " + num(secs) + " s < 60 s");
    return o;
}

Outcome occupancy_jacobian_fd() {
    Outcome o;
    std::mt19937_64 rng(90003);
    double worst = 0.0;
    int scaled_off = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const double gamma = std::array{0.3, 0.6, 0.9}[trial % 3];
        const Cmp cmp = nt::random_cmp(rng, draw(rng, 1, 5), draw(rng, 2, 4), gamma);
        const Matrix theta = nt::random_logits(rng, cmp.n_states(), cmp.n_actions());
        const Matrix analytic = occupancy_jacobian(cmp, policy_from_logits(theta)).matrix;
        const auto omega_of = [&](const Vector& x) {
            return nt::forward_occupancy(cmp, nt::softmax_rows(nt::unflatten_rows(x, cmp.n_states(), cmp.n_actions())));
        };
        const Matrix fd = nt::fd_jacobian(omega_of, nt::flatten_rows(theta), 1e-5);
        worst = std::max(worst, nt::rel_err(analytic, fd, 1e-6));
        // ω carries the (1−γ) normalization, so the Jacobian has constant 1; rescaling by (1−γ) breaks it
        if (nt::rel_err((1.0 - gamma) * analytic, fd, 1e-6) > 1e-2) ++scaled_off;
    }
    o.require(worst <= 1e-5, "relative error " + num(worst) + " <= 1e-5");
    o.require(scaled_off == 20, "(1-gamma)-rescaled Jacobian rejected on " + std::to_string(scaled_off) + "/20");
    return o;
}

Outcome utility_gradients_fd() {
    Outcome o;
    std::mt19937_64 rng(90004);
    double worst = 0.0;
    std::string worst_name;
    for (int trial = 0; trial < 6; ++trial) {
        const Cmp cmp = nt::random_cmp(rng, draw(rng, 2, 4), draw(rng, 2, 3), std::array{0.5, 0.9}[trial % 2]);
        const int ns = cmp.n_states();
        const int na = cmp.n_actions();
        const Vector ref = nt::forward_occupancy(cmp, nt::softmax_rows(nt::random_logits(rng, ns, na)));
        const std::vector<std::pair<std::string, UtilityPtr>> utilities{
            {"linear", linear_utility(nt::random_vector(rng, cmp.n_pairs()))},
            {"state-action entropy", entropy_utility(EntropyMode::state_action, na)},
            {"state entropy", entropy_utility(EntropyMode::state, na)},
            {"mixture MI", mixture_mutual_information(LabelSpace::state, na)},
            {"JS", js_to_reference(Occupancy(ref))}};
        for (const auto& [name, f] : utilities) {
            const std::size_t k = f->arity() == 0 ? 2 : 1;  // mixture functionals get two components
            std::vector<Matrix> thetas;
            std::vector<TabularPolicy> pis;
            for (std::size_t i = 0; i < k; ++i) {
                thetas.push_back(nt::random_logits(rng, ns, na));
                pis.push_back(policy_from_logits(thetas.back()));
            }
            const Vector z = Vector::Constant(static_cast<Eigen::Index>(k), 1.0 / static_cast<double>(k));
            const UtilityGradient g = utility_gradient(cmp, PolicyMixture(pis, z), *f);
            for (std::size_t i = 0; i < k; ++i) {
                const auto value = [&, i](const Vector& x) {
                    std::vector<Vector> omegas;
                    for (std::size_t j = 0; j < k; ++j) {
                        const Matrix t = j == i ? nt::unflatten_rows(x, ns, na) : thetas[j];
                        omegas.push_back(nt::forward_occupancy(cmp, nt::softmax_rows(t)));
                    }
                    return f->value(omegas, z);
                };
                const double e = nt::rel_err(g.components[i], nt::fd_gradient(value, nt::flatten_rows(thetas[i])), 1e-6);
                if (e > worst) {
                    worst = e;
                    worst_name = name;
                }
            }
        }
    }
    o.require(worst <= 1e-5, "worst relative error " + num(worst) + " (" + worst_name + ") <= 1e-5");
    return o;
}

Outcome jensen_bregman_identity() {
    Outcome o;
    std::mt19937_64 rng(90005);
    double identity = 0.0;
    double mi = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int na = draw(rng, 1, 3);
        const int n = na * draw(rng, 1, 4);
        const int k = draw(rng, 2, 4);
        std::vector<Vector> omegas;
        for (int i = 0; i < k; ++i) omegas.push_back(nt::random_simplex(rng, n));
        const Vector z = nt::random_simplex(rng, k);
        Vector bar = Vector::Zero(n);
        for (int i = 0; i < k; ++i) bar += z(i) * omegas[static_cast<std::size_t>(i)];
        for (const auto& phi : {fisher_rao_potential(), kakade_potential(na)}) {
            double sum = 0.0;
            for (int i = 0; i < k; ++i) sum += z(i) * bregman_divergence(*phi, omegas[static_cast<std::size_t>(i)], bar);
            identity = std::max(identity, std::abs(dispersion(*phi, omegas, z) - sum));
        }
        mi = std::max(mi, std::abs(dispersion(*fisher_rao_potential(), omegas, z) - nt::brute_force_mi(omegas, z)));
    }
    Vector a(4), b(4);
    a << 0.5, 0.5, 0.0, 0.0;
    b << 0.0, 0.0, 0.5, 0.5;
    const auto f = mixture_mutual_information(LabelSpace::state_action, 1);
    const double disjoint = f->to_report(f->value(std::vector<Vector>{a, b}, Vector::Constant(2, 0.5)));
    o.require(identity <= 1e-10, "dispersion vs Σ z D " + num(identity) + " <= 1e-10");
    o.require(mi <= 1e-10, "negative-entropy dispersion vs brute-force MI " + num(mi) + " <= 1e-10");
    o.require(std::abs(disjoint - 1.0) <= 1e-12, "disjoint even mixture " + num(disjoint) + " bit");
    return o;
}

Outcome mirror_descent_equivalence() {
    Outcome o;
    std::mt19937_64 rng(90006);
    double grad = 0.0;
    double hess = 0.0;
    double oracle_grad = 0.0;
    double oracle_hess = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Cmp cmp = nt::random_cmp(rng, draw(rng, 2, 4), draw(rng, 2, 3), std::array{0.5, 0.9}[trial % 2]);
        const int ns = cmp.n_states();
        const int na = cmp.n_actions();
        const Matrix theta_k = nt::random_logits(rng, ns, na);
        const UtilityPtr f = trial % 2 == 0 ? UtilityPtr(linear_utility(nt::random_vector(rng, cmp.n_pairs())))
                                            : UtilityPtr(entropy_utility(EntropyMode::state_action, na));
        const EquivalenceReport rep = surrogate_equivalence_check(cmp, policy_from_logits(theta_k), *f);
        grad = std::max(grad, rep.gradient_gap);
        hess = std::max({hess, rep.pmd_hessian_gap, rep.surr_hessian_gap});

        // independent regularizers: kakade Bregman D(ω_θ‖ω_k) and E_{d_k} KL(π_k‖π_θ)
        const Matrix probs_k = nt::softmax_rows(theta_k);
        const Vector d_k = nt::state_sums(nt::forward_occupancy(cmp, probs_k), na);
        const auto pmd = [&](const Vector& x) {
            const Matrix p = nt::softmax_rows(nt::unflatten_rows(x, ns, na));
            return weighted_row_kl(nt::state_sums(nt::forward_occupancy(cmp, p), na), p, probs_k);
        };
        const auto surr = [&](const Vector& x) {
            return weighted_row_kl(d_k, probs_k, nt::softmax_rows(nt::unflatten_rows(x, ns, na)));
        };
        const Vector x = nt::flatten_rows(theta_k);
        oracle_grad = std::max(oracle_grad, (nt::fd_gradient(pmd, x) - nt::fd_gradient(surr, x)).cwiseAbs().maxCoeff());
        oracle_hess = std::max(oracle_hess, (fd_hessian(pmd, x, 1e-4) - fd_hessian(surr, x, 1e-4)).cwiseAbs().maxCoeff());
    }
    o.require(grad <= 1e-8, "gradient gap " + num(grad) + " <= 1e-8");
    o.require(hess <= 1e-6, "regularizer Hessian gap " + num(hess) + " <= 1e-6");
    o.require(oracle_grad <= 1e-8, "finite-difference gradient gap " + num(oracle_grad) + " <= 1e-8");
    o.require(oracle_hess <= 1e-6, "finite-difference Hessian gap " + num(oracle_hess) + " <= 1e-6");
    return o;
}

Outcome linear_sanity() {
    Outcome o;
    std::mt19937_64 rng(90007);
    const auto start = Clock::now();
    int hits = 0;
    double worst = 0.0;
    for (int seed = 0; seed < 20; ++seed) {
        const Cmp cmp = nt::random_cmp(rng, 5, 3, 0.9);
        const Vector r = nt::random_vector(rng, cmp.n_pairs(), 0.0, 1.0);
        OptimizerConfig config;
        config.step_size = 1.0;
        config.iterations = 500;
        const RunLog log =
            run_optimization(Problem{cmp, linear_utility(r), {}, Vector::Ones(1)}, {Matrix::Zero(5, 3)}, config);
        const double opt = enumerate_linear_optimum(cmp, r);
        const double reached = r.dot(nt::forward_occupancy(cmp, nt::softmax_rows(log.final_thetas[0])));
        const double gap = std::abs(reached - opt) / std::abs(opt);
        worst = std::max(worst, gap);
        if (gap <= 1e-3 && log.records.back().iter <= 500) ++hits;
    }
    const double secs = seconds_since(start);
    o.require(hits >= 19, std::to_string(hits) + "/20 seeds within 1e-3 relative (worst " + num(worst) + ")");
    o.require(secs < 30.0, "runtime " + num(secs) + " s < 30 s");
    return o;
}

Outcome maxent_two_state() {
    Outcome o;
    const auto start = Clock::now();
    const ExperimentConfig config = preset("twostate_fig3");
    const BuiltExperiment built = build_experiment(config);
    const Cmp& chain = built.problem.cmp;
    const double best = nt::grid_maximize_two_state(chain, [](const Vector& w) { return nt::shannon(w); }).value / kLn2;
    const auto logs = run_experiment(config);
    double vpg = 0.0;
    double hpg = 0.0;
    for (const auto& log : logs) {
        const double h = nt::shannon(nt::forward_occupancy(chain, nt::softmax_rows(log.final_thetas[0]))) / kLn2;
        (log.optimizer == "vpg" ? vpg : hpg) = h;
    }
    const double secs = seconds_since(start);
    o.require(std::abs(best - hpg) <= 0.01, "HPG " + num(hpg) + " bits vs grid maximum " + num(best));
    o.require(best - vpg > 0.01, "VPG unconverged at the budget (" + num(vpg) + " bits)");
    o.require(hpg >= vpg, "HPG >= VPG");
    o.require(secs < 30.0, "runtime " + num(secs) + " s < 30 s");
    return o;
}

Outcome constrained_gridworld() {
    Outcome o;
    const auto start = Clock::now();
    const ExperimentConfig config = preset("gridworld_fig2");
    const BuiltExperiment built = build_experiment(config);
    const Cmp& cmp = built.problem.cmp;
    const int na = cmp.n_actions();
    const Vector expert = nt::forward_occupancy(cmp, built.expert->probs());
    const double threshold = config.constraints.front().threshold_bits;
    const auto logs = run_experiment(config);

    const auto final_mi = [&](const RunLog& log, double& worst_js) {
        std::vector<Vector> states;
        worst_js = 0.0;
        for (const auto& theta : log.final_thetas) {
            const Vector w = nt::forward_occupancy(cmp, nt::softmax_rows(theta));
            worst_js = std::max(worst_js, js_bits(w, expert));
            states.push_back(nt::state_sums(w, na));
        }
        return nt::brute_force_mi(states, built.problem.weights) / kLn2;
    };
    double mi_hpg = 0.0, mi_vpg = 0.0, js_hpg = 0.0, js_vpg = 0.0;
    bool all_feasible = false;
    for (const auto& log : logs) {
        if (log.optimizer == "hpg") {
            mi_hpg = final_mi(log, js_hpg);
            all_feasible = true;
            for (const auto& rec : log.records)
                for (double g : rec.constraint_bits) all_feasible = all_feasible && g < 0.0;
        } else {
            mi_vpg = final_mi(log, js_vpg);
        }
    }
    const double secs = seconds_since(start);
    o.require(js_hpg <= threshold + 0.005, "HPG worst JS " + num(js_hpg) + " bits <= 0.105");
    o.require(mi_hpg > 0.0, "HPG MI " + num(mi_hpg) + " bits > 0");
    o.require(mi_hpg >= mi_vpg, "MI(HPG) >= MI(VPG) = " + num(mi_vpg));
    o.require(all_feasible, "every HPG iterate strictly feasible");
    o.require(secs <= 300.0, "runtime " + num(secs) + " s <= 300 s");
    return o;
}

Outcome cli_determinism() {
    Outcome o;
    const fs::path root = fs::temp_directory_path() / ("nmdp_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    for (const std::string which : {"gridworld", "twostate"}) {
        const fs::path a = root / (which + "_a");
        const fs::path b = root / (which + "_b");
        const int ra = run_cli("experiment " + which + " --out \"" + a.string() + "\" > /dev/null");
        const int rb = run_cli("experiment " + which + " --out \"" + b.string() + "\" > /dev/null");
        bool same = ra == 0 && rb == 0;
        int files = 0;
        if (same) {
            for (const auto& entry : fs::directory_iterator(a)) {
                if (entry.path().extension() != ".csv") continue;
                ++files;
                const fs::path other = b / entry.path().filename();
                same = same && fs::exists(other) && read_file(entry.path()) == read_file(other);
            }
        }
        o.require(same && files >= 3, which + ": " + std::to_string(files) + " CSVs byte-identical");
    }
    fs::remove_all(root);
    return o;
}

Outcome check_subcommand() {
    Outcome o;
    const int code = run_cli("check > /dev/null");
    o.require(code == 0, "exit code " + std::to_string(code));
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"occupancy correctness", occupancy_correctness},
        {"Monte-Carlo discounted sums", monte_carlo_sums},
        {"occupancy Jacobian", occupancy_jacobian_fd},
        {"utility gradients", utility_gradients_fd},
        {"Jensen-Bregman identity", jensen_bregman_identity},
        {"mirror-descent equivalence", mirror_descent_equivalence},
        {"linear sanity", linear_sanity},
        {"two-state maximum entropy", maxent_two_state},
        {"constrained diversity gridworld", constrained_gridworld},
        {"experiment determinism", cli_determinism},
        {"check subcommand", check_subcommand},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome out;
        try {
            out = criteria[i].second();
        } catch (const std::exception& e) {
            out.passed = false;
            out.detail = std::string("exception: ") + e.what();
        }
        if (!out.passed) ++failed;
        std::cout << (out.passed ? "PASS " : "FAIL ") << i + 1 << " " << criteria[i].first << ": " << out.detail
                  << std::endl;
    }
    std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size() << " criteria passed"
              << std::endl;
    return failed == 0 ? 0 : 1;
}
