#pragma once

// Lipschitz constants (kernels in Wasserstein, network layers, backup
// operators, functions over states) and the error-bound formulas built on them.

#include "lipmbrl/backup.hpp"
#include "lipmbrl/core_mdp.hpp"
#include "lipmbrl/layered_net.hpp"
#include "lipmbrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lipmbrl {

/// Raised when a bound's precondition (such as gamma * K < 1) fails.
class BoundInapplicable : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// *******************************************************
// Functions over states
// *******************************************************

/// max over s1 != s2 of |v(s1) - v(s2)| / d(s1, s2).
inline double function_lipschitz(const Vector& values, const Metric& metric) {
    if (values.size() != metric.size()) throw std::invalid_argument("value vector and metric sizes differ");
    double k = 0.0;
    for (Index i = 0; i < values.size(); ++i)
        for (Index j = i + 1; j < values.size(); ++j)
            k = std::max(k, std::abs(values[i] - values[j]) / metric(i, j));
    return k;
}

/// Uniform-over-columns constant: max over columns a of function_lipschitz(values(., a)).
inline double function_lipschitz_uniform(const Matrix& values, const Metric& metric) {
    double k = 0.0;
    for (Index a = 0; a < values.cols(); ++a) k = std::max(k, function_lipschitz(values.col(a), metric));
    return k;
}

// *******************************************************
// Transition kernels
// *******************************************************

struct KernelLipschitz {
    std::vector<double> per_action;
    double max = 0.0;
};

/// max over s1 != s2 of W(K(.|s1), K(.|s2)) / d(s1, s2) for one kernel.
inline double kernel_wasserstein_lipschitz(const Kernel& kernel, const Metric& metric) {
    const Index n = kernel.rows();
    if (metric.size() != n) throw std::invalid_argument("kernel and metric sizes differ");
    std::vector<Distribution> rows;
    rows.reserve(static_cast<std::size_t>(n));
    for (Index s = 0; s < n; ++s) rows.emplace_back(kernel.row(s).transpose(), kArithmeticTol);
    double k = 0.0;
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j)
            k = std::max(k, wasserstein(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(j)], metric) /
                                metric(i, j));
    return k;
}

/// Per-action and uniform-over-actions Wasserstein Lipschitz constant of the
/// transition function, evaluated on Dirac input pairs.
inline KernelLipschitz kernel_wasserstein_lipschitz(const std::vector<Kernel>& kernels, const Metric& metric) {
    KernelLipschitz out;
    for (const Kernel& k : kernels) {
        out.per_action.push_back(kernel_wasserstein_lipschitz(k, metric));
        out.max = std::max(out.max, out.per_action.back());
    }
    return out;
}

inline KernelLipschitz kernel_wasserstein_lipschitz(const FiniteMetricMDP& mdp) {
    return kernel_wasserstein_lipschitz(mdp.transitions(), mdp.metric());
}

// *******************************************************
// Composition and network layers
// *******************************************************

/// Upper bound on the constant of a composition: the product. Empty -> 1.
inline double compose_constants(std::span<const double> constants) {
    double k = 1.0;
    for (double c : constants) {
        if (!(c >= 0.0)) throw std::invalid_argument("Lipschitz constants must be nonnegative");
        k *= c;
    }
    return k;
}

inline double compose_constants(std::initializer_list<double> constants) {
    return compose_constants(std::span<const double>(constants.begin(), constants.size()));
}

/// ReLU is 1-Lipschitz under every p-norm.
inline constexpr double relu_lipschitz(NormP) { return 1.0; }
/// Adding a fixed bias is an isometry under every p-norm.
inline constexpr double bias_lipschitz(NormP) { return 1.0; }

/// Constant of act(W x + b): matrix constant composed with bias and activation.
inline double layer_lipschitz(const Layer& layer, NormP p) {
    const double act = layer.activation == Activation::relu ? relu_lipschitz(p) : 1.0;
    return compose_constants({matrix_lipschitz(layer.weight, p), bias_lipschitz(p), act});
}

inline double network_lipschitz(const LayeredNet& net, NormP p) {
    std::vector<double> ks;
    for (const Layer& l : net.layers()) ks.push_back(layer_lipschitz(l, p));
    return compose_constants(ks);
}

inline double vector_norm(const Vector& v, NormP p) {
    switch (p) {
        case NormP::one: return v.lpNorm<1>();
        case NormP::two: return v.norm();
        case NormP::inf: return v.lpNorm<Eigen::Infinity>();
    }
    throw std::invalid_argument("unsupported norm");
}

// *******************************************************
// Backup operators
// *******************************************************

using VectorPair = std::pair<Vector, Vector>;

/// `count` pairs of vectors with entries uniform in [-magnitude, magnitude].
inline std::vector<VectorPair> random_vector_pairs(Index dim, std::size_t count, double magnitude,
                                                   std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-magnitude, magnitude);
    std::vector<VectorPair> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Vector a(dim), b(dim);
        for (Index j = 0; j < dim; ++j) a[j] = u(rng);
        for (Index j = 0; j < dim; ++j) b[j] = u(rng);
        out.emplace_back(std::move(a), std::move(b));
    }
    return out;
}

/// Largest absolute entry across all sampled vectors.
inline double sampled_vmax(const std::vector<VectorPair>& samples) {
    double v = 0.0;
    for (const auto& [a, b] : samples) v = std::max({v, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
    return v;
}

/// Stated constant under the max norm: 1 for max, mean, eps-greedy and
/// mellowmax; sqrt(|A|) + beta * V_max * |A| for boltzmann.
inline double operator_lipschitz_bound(const BackupOperator& op, Index n_actions, double v_max) {
    if (op.is_non_expansion()) return 1.0;
    const double a = static_cast<double>(n_actions);
    return std::sqrt(a) + op.param * v_max * a;
}

/// max over pairs of |op(x1) - op(x2)| / ||x1 - x2||_inf.
inline double operator_constant_check(const BackupOperator& op, const std::vector<VectorPair>& samples) {
    double worst = 0.0;
    for (const auto& [x1, x2] : samples) {
        if (x1.size() != x2.size()) throw std::invalid_argument("sample vectors have different dimensions");
        const double den = (x1 - x2).lpNorm<Eigen::Infinity>();
        if (den == 0.0) continue;
        worst = std::max(worst, std::abs(backup_apply(op, x1) - backup_apply(op, x2)) / den);
    }
    return worst;
}

// *******************************************************
// Error bounds
// *******************************************************

struct BoundInputs {
    double delta = 0.0;  ///< one-step Wasserstein model error
    double k_bar = 0.0;  ///< min(K_F, K_T)
    double k_r = 0.0;    ///< reward Lipschitz constant
    double gamma = 0.0;
    int horizon = 1;

    void validate() const {
        if (!(delta >= 0.0) || !(k_bar >= 0.0) || !(k_r >= 0.0))
            throw std::invalid_argument("bound inputs must be nonnegative");
        if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0,1)");
        if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
    }
};

/// Multi-step error bound delta * sum_{i<n} K^i.
inline double compounding_bound(const BoundInputs& in) {
    in.validate();
    if (in.k_bar == 1.0) return in.delta * static_cast<double>(in.horizon);
    double sum = 0.0, term = 1.0;
    for (int i = 0; i < in.horizon; ++i) {
        sum += term;
        term *= in.k_bar;
    }
    return in.delta * sum;
}

/// gamma K_R delta / ((1 - gamma)(1 - gamma K)); throws BoundInapplicable when gamma K >= 1.
inline double value_bound(const BoundInputs& in) {
    in.validate();
    if (in.gamma * in.k_bar >= 1.0) throw BoundInapplicable("value bound needs gamma * K_bar < 1");
    return in.gamma * in.k_r * in.delta / ((1.0 - in.gamma) * (1.0 - in.gamma * in.k_bar));
}

/// Lipschitz bound K_R / (1 - gamma K_W) on GVI's value function.
inline double gvi_value_lipschitz_bound(double k_r, double gamma, double k_w) {
    if (!(k_r >= 0.0) || !(k_w >= 0.0) || !(gamma >= 0.0 && gamma < 1.0))
        throw std::invalid_argument("invalid GVI bound inputs");
    if (gamma * k_w >= 1.0) throw BoundInapplicable("GVI Lipschitz bound needs gamma * K_W < 1");
    return k_r / (1.0 - gamma * k_w);
}

}  // namespace lipmbrl
