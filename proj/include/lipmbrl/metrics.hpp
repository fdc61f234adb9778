#pragma once

// Probability metrics on finite metric spaces: Wasserstein-1 (primal
// transport LP, Kantorovich-Rubinstein dual LP, closed form on a line),
// total variation and KL divergence.

#include "lipmbrl/core_mdp.hpp"
#include "lipmbrl/detail/dense_simplex.hpp"
#include "lipmbrl/detail/transport_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace lipmbrl {

/// Joint distribution with the two compared marginals, and its transport cost.
struct Coupling {
    Matrix joint;
    double cost = 0.0;
};

/// A 1-Lipschitz test function over states and its dual objective value.
struct DualPotential {
    Vector values;
    double objective = 0.0;
};

namespace detail {

inline void require_same_space(const Distribution& a, const Distribution& b, const Metric* metric = nullptr) {
    if (a.size() != b.size()) throw std::invalid_argument("distributions have different dimensions");
    if (metric && metric->size() != a.size()) throw std::invalid_argument("metric and distribution sizes differ");
}

}  // namespace detail

/// Optimal coupling of mu1 and mu2 under the ground metric. Zero-mass states
/// are dropped before solving and reinserted as empty rows/columns.
inline Coupling wasserstein_primal(const Distribution& mu1, const Distribution& mu2, const Metric& metric) {
    detail::require_same_space(mu1, mu2, &metric);
    const Index n = mu1.size();
    std::vector<Index> rows, cols;
    for (Index i = 0; i < n; ++i) {
        if (mu1[i] > 0.0) rows.push_back(i);
        if (mu2[i] > 0.0) cols.push_back(i);
    }
    const auto m = static_cast<Index>(rows.size());
    const auto k = static_cast<Index>(cols.size());
    Vector supply(m), demand(k);
    Matrix cost(m, k);
    for (Index r = 0; r < m; ++r) supply[r] = mu1[rows[static_cast<std::size_t>(r)]];
    for (Index c = 0; c < k; ++c) demand[c] = mu2[cols[static_cast<std::size_t>(c)]];
    for (Index r = 0; r < m; ++r)
        for (Index c = 0; c < k; ++c) cost(r, c) = metric(rows[static_cast<std::size_t>(r)], cols[static_cast<std::size_t>(c)]);

    const detail::TransportSolution sol = detail::solve_transportation(supply, demand, cost);

    Coupling out;
    out.joint = Matrix::Zero(n, n);
    for (Index r = 0; r < m; ++r)
        for (Index c = 0; c < k; ++c) {
            const double x = sol.plan(r, c);
            if (x == 0.0) continue;
            out.joint(rows[static_cast<std::size_t>(r)], cols[static_cast<std::size_t>(c)]) = x;
            out.cost += x * cost(r, c);
        }
    return out;
}

/// Wasserstein-1 distance (primal cost).
inline double wasserstein(const Distribution& mu1, const Distribution& mu2, const Metric& metric) {
    return wasserstein_primal(mu1, mu2, metric).cost;
}

/// Maximizes sum_s f(s) (mu1(s) - mu2(s)) over f with f(i) - f(j) <= d(i,j).
///
/// Solved as the transshipment LP on the complete directed graph with a
/// generic tableau simplex; f is read off the optimal simplex multipliers and
/// grounded at f(n-1) = 0. This route shares no code with wasserstein_primal.
inline DualPotential wasserstein_dual(const Distribution& mu1, const Distribution& mu2, const Metric& metric) {
    detail::require_same_space(mu1, mu2, &metric);
    const Index n = mu1.size();
    DualPotential out;
    out.values = Vector::Zero(n);
    if (n == 1 || mu1 == mu2) return out;

    const Vector excess = mu1.mass() - mu2.mass();
    const Index rows = n - 1;  // node n-1 is dropped; its constraint is implied
    const Index arcs = n * (n - 1);
    Matrix A = Matrix::Zero(rows, arcs);
    Vector c(arcs);
    Index col = 0;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            if (i < rows) A(i, col) = 1.0;
            if (j < rows) A(j, col) = -1.0;
            c[col] = metric(i, j);
            ++col;
        }
    const detail::LpSolution lp = detail::minimize_standard_form(A, excess.head(rows), c);
    out.values.head(rows) = lp.duals;
    out.objective = out.values.dot(excess);
    return out;
}

/// Wasserstein-1 on the real line for masses placed on a sorted support.
/// Throws std::invalid_argument when the support is not sorted ascending.
inline double wasserstein_1d(std::span<const double> support, const Distribution& mu1, const Distribution& mu2) {
    detail::require_same_space(mu1, mu2);
    if (static_cast<Index>(support.size()) != mu1.size())
        throw std::invalid_argument("support size does not match the distributions");
    for (std::size_t i = 1; i < support.size(); ++i)
        if (!(support[i - 1] <= support[i])) throw std::invalid_argument("support is not sorted ascending");
    double cdf1 = 0.0, cdf2 = 0.0, total = 0.0;
    for (std::size_t i = 0; i + 1 < support.size(); ++i) {
        cdf1 += mu1[static_cast<Index>(i)];
        cdf2 += mu2[static_cast<Index>(i)];
        total += std::abs(cdf1 - cdf2) * (support[i + 1] - support[i]);
    }
    return total;
}

/// A weighted point mass on the real line.
struct WeightedPoint {
    double x;
    double weight;
};

/// Wasserstein-1 between two finitely supported measures on the real line
/// given as (location, weight) lists in any order; each side must sum to 1.
inline double wasserstein_1d(std::vector<WeightedPoint> a, std::vector<WeightedPoint> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("empty point set");
    auto by_x = [](const WeightedPoint& p, const WeightedPoint& q) { return p.x < q.x; };
    std::sort(a.begin(), a.end(), by_x);
    std::sort(b.begin(), b.end(), by_x);
    // Sweep the merged support, integrating |F_a - F_b| between consecutive points.
    std::size_t ia = 0, ib = 0;
    double fa = 0.0, fb = 0.0, total = 0.0;
    double prev = std::min(a.front().x, b.front().x);
    while (ia < a.size() || ib < b.size()) {
        const double next = ib == b.size() || (ia < a.size() && a[ia].x <= b[ib].x) ? a[ia].x : b[ib].x;
        total += std::abs(fa - fb) * (next - prev);
        while (ia < a.size() && a[ia].x == next) fa += a[ia++].weight;
        while (ib < b.size() && b[ib].x == next) fb += b[ib++].weight;
        prev = next;
    }
    return total;
}

/// Half the L1 distance between the mass vectors.
inline double total_variation(const Distribution& mu1, const Distribution& mu2) {
    detail::require_same_space(mu1, mu2);
    return 0.5 * (mu1.mass() - mu2.mass()).cwiseAbs().sum();
}

/// KL(mu1 || mu2) with 0 log(0/q) = 0; +infinity when mu1 puts mass where mu2 has none.
inline double kl_divergence(const Distribution& mu1, const Distribution& mu2) {
    detail::require_same_space(mu1, mu2);
    double total = 0.0;
    for (Index i = 0; i < mu1.size(); ++i) {
        const double p = mu1[i];
        if (p == 0.0) continue;
        const double q = mu2[i];
        if (q == 0.0) return std::numeric_limits<double>::infinity();
        total += p * std::log(p / q);
    }
    return total;
}

}  // namespace lipmbrl
