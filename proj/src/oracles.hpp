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

// Generators and reference computations for the check suite. Nothing here calls
// into the solvers it is used to check.

#pragma once

#include "nmdp/cmp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace nmdp::oracle {

inline Cmp two_state_chain(double gamma) {
    Matrix kernel(4, 2);
    kernel << 1, 0, 0, 1, 0, 1, 1, 0;
    Vector mu(2);
    mu << 1, 0;
    return Cmp(2, 2, kernel, mu, gamma);
}

/// Random CMP with Dirichlet(1)-like rows; roughly a third of entries zeroed when `sparse`.
inline Cmp random_cmp(std::mt19937_64& rng, int ns, int na, double gamma, bool sparse = false) {
    std::exponential_distribution<double> expo(1.0);
    std::bernoulli_distribution drop(sparse ? 0.35 : 0.0);
    Matrix kernel(ns * na, ns);
    for (int r = 0; r < ns * na; ++r) {
        double sum = 0.0;
        for (int c = 0; c < ns; ++c) {
            kernel(r, c) = drop(rng) ? 0.0 : expo(rng);
            sum += kernel(r, c);
        }
        if (sum == 0.0) {
            kernel(r, static_cast<int>(rng() % ns)) = 1.0;
            sum = 1.0;
        }
        kernel.row(r) /= sum;
    }
    Vector mu(ns);
    for (int s = 0; s < ns; ++s) mu(s) = expo(rng);
    mu /= mu.sum();
    return Cmp(ns, na, kernel, mu, gamma);
}

inline Matrix random_logits(std::mt19937_64& rng, int ns, int na, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Matrix out(ns, na);
    for (int s = 0; s < ns; ++s)
        for (int a = 0; a < na; ++a) out(s, a) = normal(rng);
    return out;
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
    return v;
}

inline Vector random_simplex(std::mt19937_64& rng, Eigen::Index n) {
    std::exponential_distribution<double> expo(1.0);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = expo(rng) + 1e-3;
    return v / v.sum();
}

/// Softmax written out independently of TabularPolicy.
inline Matrix softmax_rows(const Matrix& logits) {
    Matrix p(logits.rows(), logits.cols());
    for (Eigen::Index s = 0; s < logits.rows(); ++s) {
        double z = 0.0;
        for (Eigen::Index a = 0; a < logits.cols(); ++a) z += std::exp(logits(s, a));
        for (Eigen::Index a = 0; a < logits.cols(); ++a) p(s, a) = std::exp(logits(s, a)) / z;
    }
    return p;
}

/// Occupancy by propagating the state distribution forward until γ^t < 1e-17.
inline Vector forward_occupancy(const Cmp& cmp, const Matrix& probs) {
    const int ns = cmp.n_states();
    const int na = cmp.n_actions();
    Vector dist = cmp.mu();
    Vector omega = Vector::Zero(ns * na);
    double w = 1.0 - cmp.gamma();
    for (int t = 0; t < 100000 && (t == 0 || w > 1e-17); ++t) {
        Vector next = Vector::Zero(ns);
        for (int s = 0; s < ns; ++s) {
            for (int a = 0; a < na; ++a) {
                const double p = dist(s) * probs(s, a);
                omega(s * na + a) += w * p;
                for (int sp = 0; sp < ns; ++sp) next(sp) += p * cmp.kernel()(s * na + a, sp);
            }
        }
        dist = next;
        w *= cmp.gamma();
        if (cmp.gamma() == 0.0) break;
    }
    return omega;
}

/// Σ_{t=0}^{T} (γ P)^t for the pair kernel, returned in [to | from] convention.
inline Matrix neumann_successor(const Cmp& cmp, const Matrix& probs, int terms) {
    const int n = cmp.n_pairs();
    const int na = cmp.n_actions();
    Matrix p(n, n);
    for (int x = 0; x < n; ++x)
        for (int sp = 0; sp < cmp.n_states(); ++sp)
            for (int ap = 0; ap < na; ++ap) p(x, sp * na + ap) = cmp.kernel()(x, sp) * probs(sp, ap);
    Matrix term = Matrix::Identity(n, n);
    Matrix sum = term;
    for (int t = 1; t <= terms; ++t) {
        term = cmp.gamma() * term * p;
        sum += term;
    }
    return sum.transpose();
}

/// Central finite-difference Jacobian of a vector-valued map.
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x, double h = 1e-5) {
    const Vector f0 = f(x);
    Matrix jac(f0.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        Vector xp = x;
        Vector xm = x;
        xp(j) += h;
        xm(j) -= h;
        jac.col(j) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return jac;
}

inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-5) {
    Vector g(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        Vector xp = x;
        Vector xm = x;
        xp(j) += h;
        xm(j) -= h;
        g(j) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

inline Vector flatten_rows(const Matrix& m) {
    Vector v(m.size());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) v(r * m.cols() + c) = m(r, c);
    return v;
}

inline Matrix unflatten_rows(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v(r * cols + c);
    return m;
}

/// Relative error ‖a − b‖∞ / max(‖b‖∞, floor).
inline double rel_err(const Matrix& a, const Matrix& b, double floor = 1e-8) {
    return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), floor);
}

/// Basis of the flow-tangent space {v : Σ v = 0, B v = 0} (columns), from an SVD of the stacked constraints.
inline Matrix flow_tangent_basis(const Cmp& cmp) {
    const int n = cmp.n_pairs();
    Matrix cons(cmp.n_states() + 1, n);
    for (int s = 0; s < cmp.n_states(); ++s)
        for (int sp = 0; sp < cmp.n_states(); ++sp)
            for (int ap = 0; ap < cmp.n_actions(); ++ap)
                cons(s, sp * cmp.n_actions() + ap) = (s == sp ? 1.0 : 0.0) - cmp.gamma() * cmp.kernel()(sp * cmp.n_actions() + ap, s);
    cons.row(cmp.n_states()).setOnes();
    Eigen::JacobiSVD<Matrix> svd(cons, Eigen::ComputeFullV);
    int rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > 1e-10 * svd.singularValues()(0)) ++rank;
    return svd.matrixV().rightCols(n - rank);
}

/// Directional derivatives along each column of `basis`, by central differences.
inline Vector fd_directional(const std::function<double(const Vector&)>& f, const Vector& x, const Matrix& basis,
                             double h = 1e-6) {
    Vector out(basis.cols());
    for (Eigen::Index j = 0; j < basis.cols(); ++j)
        out(j) = (f(x + h * basis.col(j)) - f(x - h * basis.col(j))) / (2.0 * h);
    return out;
}

/// Mutual information I(label; x) from the explicit joint p(i, x) = z_i p_i(x), as H(label) + H(x) − H(label, x).
inline double brute_force_mi(const std::vector<Vector>& p, const Vector& z) {
    const auto h = [](double q) { return q > 0.0 ? -q * std::log(q) : 0.0; };
    const Eigen::Index n = p.front().size();
    double h_label = 0.0;
    double h_x = 0.0;
    double h_joint = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) h_label += h(z(static_cast<Eigen::Index>(i)));
    for (Eigen::Index x = 0; x < n; ++x) {
        double px = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double joint = z(static_cast<Eigen::Index>(i)) * p[i](x);
            px += joint;
            h_joint += h(joint);
        }
        h_x += h(px);
    }
    return h_label + h_x - h_joint;
}

/// Sums the state-action vector over actions.
inline Vector state_sums(const Vector& omega, int na) {
    Vector out = Vector::Zero(omega.size() / na);
    for (Eigen::Index x = 0; x < omega.size(); ++x) out(x / na) += omega(x);
    return out;
}

struct GridMaximum {
    double value = -1.0;   ///< nats
    double stay0 = 0.0;    ///< π(stay | s0)
    double stay1 = 0.0;    ///< π(stay | s1)
};

/// Maximizes g over (π(stay|s0), π(stay|s1)) ∈ [0,1]² with a 101×101 grid refined by zooming.
inline GridMaximum grid_maximize_two_state(const Cmp& chain, const std::function<double(const Vector&)>& g,
                                           int zoom_rounds = 8) {
    GridMaximum best;
    double lo0 = 0.0, hi0 = 1.0, lo1 = 0.0, hi1 = 1.0;
    for (int round = 0; round <= zoom_rounds; ++round) {
        for (int i = 0; i <= 100; ++i) {
            for (int j = 0; j <= 100; ++j) {
                const double p0 = lo0 + (hi0 - lo0) * i / 100.0;
                const double p1 = lo1 + (hi1 - lo1) * j / 100.0;
                Matrix probs(2, 2);
                probs << p0, 1.0 - p0, p1, 1.0 - p1;
                const double v = g(forward_occupancy(chain, probs));
                if (v > best.value) best = {v, p0, p1};
            }
        }
        const double w0 = (hi0 - lo0) / 10.0;
        const double w1 = (hi1 - lo1) / 10.0;
        lo0 = std::max(0.0, best.stay0 - w0);
        hi0 = std::min(1.0, best.stay0 + w0);
        lo1 = std::max(0.0, best.stay1 - w1);
        hi1 = std::min(1.0, best.stay1 + w1);
    }
    return best;
}

/// Shannon entropy in nats with 0 log 0 = 0.
inline double shannon(const Vector& p) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i)
        if (p(i) > 0.0) h -= p(i) * std::log(p(i));
    return h;
}

}  // namespace nmdp::oracle
