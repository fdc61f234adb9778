#pragma once

// Independent reference implementations used only by the tests. None of them
// call the library routine they are checked against.

#include "lipmbrl/core_mdp.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

using lipmbrl::Index;
using lipmbrl::Matrix;
using lipmbrl::Vector;

/// Minimum transport cost by enumerating every basis of the coupling polytope
/// (choose rank-many cells, solve the marginal equations, keep nonnegative
/// solutions). Exponential; meant for supports of size <= 3.
inline double coupling_vertex_min(const Vector& mu1, const Vector& mu2, const Matrix& cost) {
    const Index m = mu1.size(), k = mu2.size(), cells = m * k;
    // Equality system: row sums then column sums; the last column-sum equation is redundant.
    const Index eqs = m + k - 1;
    Matrix a = Matrix::Zero(eqs, cells);
    Vector b(eqs);
    for (Index i = 0; i < m; ++i) {
        for (Index j = 0; j < k; ++j) a(i, i * k + j) = 1.0;
        b[i] = mu1[i];
    }
    for (Index j = 0; j + 1 < k; ++j) {
        for (Index i = 0; i < m; ++i) a(m + j, i * k + j) = 1.0;
        b[m + j] = mu2[j];
    }
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> pick(static_cast<std::size_t>(cells), 0);
    std::fill(pick.end() - eqs, pick.end(), 1);
    do {
        Matrix basis(eqs, eqs);
        std::vector<Index> cols;
        for (Index c = 0; c < cells; ++c)
            if (pick[static_cast<std::size_t>(c)]) cols.push_back(c);
        for (Index c = 0; c < eqs; ++c) basis.col(c) = a.col(cols[static_cast<std::size_t>(c)]);
        Eigen::FullPivLU<Matrix> lu(basis);
        if (lu.rank() < eqs) continue;
        const Vector x = lu.solve(b);
        if ((x.array() < -1e-12).any()) continue;
        double c = 0.0;
        for (Index i = 0; i < eqs; ++i) {
            const Index cell = cols[static_cast<std::size_t>(i)];
            c += x[i] * cost(cell / k, cell % k);
        }
        best = std::min(best, c);
    } while (std::next_permutation(pick.begin(), pick.end()));
    return best;
}

/// Textbook value iteration with the max backup, in-place updates.
inline Matrix value_iteration_q(const std::vector<Matrix>& kernels, const Matrix& rewards, double gamma, double tol) {
    const Index n = rewards.rows(), na = rewards.cols();
    Matrix q = Matrix::Zero(n, na);
    for (int it = 0; it < 1000000; ++it) {
        double change = 0.0;
        for (Index s = 0; s < n; ++s)
            for (Index a = 0; a < na; ++a) {
                double next = rewards(s, a);
                for (Index t = 0; t < n; ++t) {
                    double best = q(t, 0);
                    for (Index b = 1; b < na; ++b) best = std::max(best, q(t, b));
                    next += gamma * kernels[static_cast<std::size_t>(a)](s, t) * best;
                }
                change = std::max(change, std::abs(next - q(s, a)));
                q(s, a) = next;
            }
        if (change < tol * 1e-2) break;
    }
    return q;
}

/// V = sum_n gamma^n T^n R, truncated after `terms` terms.
inline Vector truncated_series(const Matrix& kernel, const Vector& rewards, double gamma, int terms) {
    Vector v = Vector::Zero(rewards.size());
    Vector term = rewards;
    for (int n = 0; n < terms; ++n) {
        v += term;
        term = gamma * (kernel * term);
    }
    return v;
}

/// Iterates V <- R + gamma T V until the change is below tol.
inline Vector iterative_evaluation(const Matrix& kernel, const Vector& rewards, double gamma, double tol) {
    Vector v = Vector::Zero(rewards.size());
    for (int it = 0; it < 10000000; ++it) {
        const Vector next = rewards + gamma * (kernel * v);
        const double change = (next - v).cwiseAbs().maxCoeff();
        v = next;
        if (change < tol) break;
    }
    return v;
}

/// Distribution after n steps by summing over every sequence of sampled maps:
/// each sequence (f_1..f_n) moves each state deterministically and carries
/// probability prod g(f_i | a_i).
inline Vector map_sequence_push(const std::vector<std::vector<Index>>& maps, const Matrix& weights,
                                const Vector& mu, const std::vector<Index>& actions) {
    const Index n = mu.size();
    Vector out = Vector::Zero(n);
    std::function<void(std::size_t, std::vector<Index>, double)> walk = [&](std::size_t depth, std::vector<Index> where,
                                                                           double prob) {
        if (prob == 0.0) return;
        if (depth == actions.size()) {
            for (Index s = 0; s < n; ++s) out[where[static_cast<std::size_t>(s)]] += prob * mu[s];
            return;
        }
        for (std::size_t f = 0; f < maps.size(); ++f) {
            std::vector<Index> next(where.size());
            for (std::size_t s = 0; s < where.size(); ++s) next[s] = maps[f][static_cast<std::size_t>(where[s])];
            walk(depth + 1, next, prob * weights(actions[depth], static_cast<Index>(f)));
        }
    };
    std::vector<Index> start(static_cast<std::size_t>(n));
    for (Index s = 0; s < n; ++s) start[static_cast<std::size_t>(s)] = s;
    walk(0, start, 1.0);
    return out;
}

}  // namespace oracle
