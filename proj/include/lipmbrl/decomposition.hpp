#pragma once

// Turns any finite transition kernel into a state-independent distribution
// over deterministic maps, built from the breakpoints of the cumulative
// transition table, and measures the Lipschitz constant of such a class.

#include "lipmbrl/core_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace lipmbrl {

/// Cumulative entries within this distance are merged into one breakpoint.
inline constexpr double kBreakpointMergeTol = 1e-12;

/// C(s, a, s_i) = sum_{j <= i} Pr(s, a, s_j) with a leading unreachable column
/// C(s, a, s_0) = 0, plus the sorted distinct entries per action.
struct CumulativeTable {
    /// values[a] is n_states x (n_states + 1).
    std::vector<Matrix> values;
    /// breakpoints[a] = c_0 = 0 < c_1 < ... < c_L = 1.
    std::vector<std::vector<double>> breakpoints;
};

namespace detail {

inline Matrix cumulative_rows(const Kernel& k) {
    const Index n = k.rows();
    Matrix c = Matrix::Zero(n, k.cols() + 1);
    for (Index s = 0; s < n; ++s) {
        double acc = 0.0;
        for (Index j = 0; j < k.cols(); ++j) {
            acc += k(s, j);
            c(s, j + 1) = acc;
        }
        c(s, k.cols()) = 1.0;  // rows sum to one within tolerance; pin the endpoint
    }
    return c;
}

inline std::vector<double> merged_breakpoints(const Matrix& cumulative) {
    std::vector<double> all(cumulative.data(), cumulative.data() + cumulative.size());
    std::sort(all.begin(), all.end());
    std::vector<double> out;
    for (double v : all) {
        if (v <= kBreakpointMergeTol) continue;
        if (out.empty() || v - out.back() > kBreakpointMergeTol) out.push_back(v);
    }
    // The top breakpoint is exactly one.
    if (out.empty() || 1.0 - out.back() > kBreakpointMergeTol)
        out.push_back(1.0);
    else
        out.back() = 1.0;
    out.insert(out.begin(), 0.0);
    return out;
}

}  // namespace detail

inline CumulativeTable cumulative_table(const FiniteMetricMDP& mdp) {
    CumulativeTable t;
    for (const Kernel& k : mdp.transitions()) {
        t.values.push_back(detail::cumulative_rows(k));
        t.breakpoints.push_back(detail::merged_breakpoints(t.values.back()));
    }
    return t;
}

/// Deterministic maps and weights reproducing one action's kernel.
///
/// f_i(s) = s_j iff C(s,a,s_{j-1}) < c_i <= C(s,a,s_j) and g(f_i|a) = c_i - c_{i-1}.
/// The result has a single action row.
inline DeterministicModelClass decompose(const FiniteMetricMDP& mdp, Index action) {
    require_valid(mdp);
    const Kernel& k = mdp.kernel(action);
    const Index n = mdp.n_states();
    const Matrix cum = detail::cumulative_rows(k);
    const std::vector<double> c = detail::merged_breakpoints(cum);

    std::vector<StateMap> maps;
    std::vector<double> weights;
    for (std::size_t i = 1; i < c.size(); ++i) {
        StateMap f(static_cast<std::size_t>(n));
        for (Index s = 0; s < n; ++s) {
            // First destination whose cumulative value reaches c_i (merge tolerance applied).
            Index j = 1;
            while (j < n && cum(s, j) < c[i] - kBreakpointMergeTol) ++j;
            f[static_cast<std::size_t>(s)] = j - 1;
        }
        maps.push_back(std::move(f));
        weights.push_back(c[i] - c[i - 1]);
    }
    Matrix w(1, static_cast<Index>(weights.size()));
    for (std::size_t i = 0; i < weights.size(); ++i) w(0, static_cast<Index>(i)) = weights[i];
    return DeterministicModelClass(n, std::move(maps), std::move(w));
}

/// Union of the per-action decompositions: identical maps are shared and each
/// action gives zero weight to maps it does not use.
inline DeterministicModelClass decompose(const FiniteMetricMDP& mdp) {
    const Index n = mdp.n_states();
    std::map<StateMap, Index> slot;
    std::vector<StateMap> maps;
    std::vector<std::vector<std::pair<Index, double>>> per_action;
    for (Index a = 0; a < mdp.n_actions(); ++a) {
        const DeterministicModelClass one = decompose(mdp, a);
        std::vector<std::pair<Index, double>> entries;
        for (Index i = 0; i < one.n_maps(); ++i) {
            const StateMap& f = one.maps()[static_cast<std::size_t>(i)];
            auto [it, inserted] = slot.try_emplace(f, static_cast<Index>(maps.size()));
            if (inserted) maps.push_back(f);
            entries.emplace_back(it->second, one.weights()(0, i));
        }
        per_action.push_back(std::move(entries));
    }
    Matrix w = Matrix::Zero(mdp.n_actions(), static_cast<Index>(maps.size()));
    for (Index a = 0; a < mdp.n_actions(); ++a)
        for (auto [i, g] : per_action[static_cast<std::size_t>(a)]) w(a, i) += g;
    return DeterministicModelClass(n, std::move(maps), std::move(w));
}

/// max over (a, s, s') of |T(s'|s,a) - sum_f 1(f(s)=s') g(f|a)|.
inline double reconstruct_and_check(const FiniteMetricMDP& mdp, const DeterministicModelClass& model) {
    if (model.n_states() != mdp.n_states() || model.n_actions() != mdp.n_actions())
        throw std::invalid_argument("model class and MDP dimensions differ");
    const std::vector<Kernel> rebuilt = model_class_to_kernel(model);
    double worst = 0.0;
    for (Index a = 0; a < mdp.n_actions(); ++a)
        worst = std::max(worst, (rebuilt[static_cast<std::size_t>(a)] - mdp.kernel(a)).cwiseAbs().maxCoeff());
    return worst;
}

/// K_F = max over maps f of max over s1 != s2 of d(f(s1), f(s2)) / d(s1, s2).
inline double model_class_lipschitz(const DeterministicModelClass& model, const Metric& metric) {
    if (metric.size() != model.n_states()) throw std::invalid_argument("metric size does not match model class");
    const Index n = model.n_states();
    double k = 0.0;
    for (const StateMap& f : model.maps())
        for (Index s1 = 0; s1 < n; ++s1)
            for (Index s2 = s1 + 1; s2 < n; ++s2) {
                const double num = metric(f[static_cast<std::size_t>(s1)], f[static_cast<std::size_t>(s2)]);
                k = std::max(k, num / metric(s1, s2));
            }
    return k;
}

}  // namespace lipmbrl
