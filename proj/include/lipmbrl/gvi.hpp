#pragma once

// Generalized value iteration with a pluggable backup operator, exact MRP
// evaluation, and the empirical Lipschitz constant of a Q table.

#include "lipmbrl/backup.hpp"
#include "lipmbrl/core_mdp.hpp"
#include "lipmbrl/lipschitz.hpp"

#include <Eigen/LU>

#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace lipmbrl {

/// Q(s, a), states by rows.
struct QFunction {
    Matrix values;
};

/// Raised when an iterative solver stops at max_iters above tolerance.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, long iterations, double residual)
        : std::runtime_error(what), iterations_(iterations), residual_(residual) {}
    long iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }

private:
    long iterations_;
    double residual_;
};

enum class SweepOrder {
    /// Every entry of the new table is computed from the previous table.
    jacobi,
    /// Entries are overwritten in place, state by state.
    gauss_seidel,
};

struct GviOptions {
    double tolerance = 1e-10;
    long max_iters = 100000;
    SweepOrder order = SweepOrder::jacobi;
    /// Starting table; zeros when unset.
    std::optional<Matrix> initial;
};

struct GviResult {
    QFunction q;
    long iterations = 0;
    double residual = 0.0;
    /// Max-abs change per sweep, in order.
    std::vector<double> residuals;
};

/// Iterates Q(s,a) <- R(s,a) + gamma sum_s' T(s'|s,a) op(Q(s', .)) until the
/// max-abs change drops below tolerance. Throws ConvergenceError otherwise.
inline GviResult gvi_run(const FiniteMetricMDP& mdp, const BackupOperator& op, const GviOptions& opts = {}) {
    require_valid(mdp);
    if (!(opts.tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
    if (opts.max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");
    const Index n = mdp.n_states();
    const Index na = mdp.n_actions();
    const Matrix r = mdp.reward_matrix();
    const double gamma = mdp.discount();

    GviResult out;
    Matrix q = opts.initial.value_or(Matrix::Zero(n, na));
    if (q.rows() != n || q.cols() != na) throw std::invalid_argument("initial Q has the wrong shape");
    Vector v(n);
    for (long it = 1; it <= opts.max_iters; ++it) {
        double residual = 0.0;
        if (opts.order == SweepOrder::jacobi) {
            for (Index s = 0; s < n; ++s) v[s] = backup_apply(op, q.row(s));
            Matrix next(n, na);
            for (Index a = 0; a < na; ++a) next.col(a) = r.col(a) + gamma * (mdp.kernel(a) * v);
            residual = (next - q).cwiseAbs().maxCoeff();
            q = std::move(next);
        } else {
            for (Index s = 0; s < n; ++s)
                for (Index a = 0; a < na; ++a) {
                    double expect = 0.0;
                    const Kernel& k = mdp.kernel(a);
                    for (Index t = 0; t < n; ++t)
                        if (k(s, t) != 0.0) expect += k(s, t) * backup_apply(op, q.row(t));
                    const double updated = r(s, a) + gamma * expect;
                    residual = std::max(residual, std::abs(updated - q(s, a)));
                    q(s, a) = updated;
                }
        }
        if (!std::isfinite(residual)) throw ConvergenceError("GVI diverged to a non-finite table", it, residual);
        out.residuals.push_back(residual);
        out.iterations = it;
        out.residual = residual;
        if (residual < opts.tolerance) {
            out.q.values = std::move(q);
            return out;
        }
    }
    std::ostringstream msg;
    msg.precision(17);
    msg << "GVI did not converge in " << opts.max_iters << " sweeps (residual " << out.residual << ")";
    throw ConvergenceError(msg.str(), out.iterations, out.residual);
}

/// Exact V = R + gamma T V for a single kernel, by LU solve.
inline Vector mrp_value(const Kernel& kernel, const Vector& rewards, double gamma) {
    const Index n = kernel.rows();
    if (kernel.cols() != n || rewards.size() != n) throw std::invalid_argument("kernel and reward sizes differ");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0,1)");
    const Matrix system = Matrix::Identity(n, n) - gamma * kernel;
    Vector v = system.partialPivLu().solve(rewards);
    const double residual = (v - rewards - gamma * kernel * v).cwiseAbs().maxCoeff();
    // I - gamma T is strictly row diagonally dominant, so this only trips on bad input.
    if (!(residual < 1e-10))
        throw std::runtime_error("MRP linear solve left residual above 1e-10");
    return v;
}

/// State values of a single-action MDP, optionally with a replacement kernel.
inline Vector mrp_value(const FiniteMetricMDP& mdp, const std::optional<Kernel>& model_kernel = std::nullopt) {
    if (mdp.n_actions() != 1) throw std::invalid_argument("mrp_value needs a single-action MDP");
    return mrp_value(model_kernel ? *model_kernel : mdp.kernel(0), mdp.rewards(), mdp.discount());
}

/// max over a and s1 != s2 of |Q(s1,a) - Q(s2,a)| / d(s1,s2).
inline double empirical_q_lipschitz(const QFunction& q, const Metric& metric) {
    return function_lipschitz_uniform(q.values, metric);
}

}  // namespace lipmbrl
