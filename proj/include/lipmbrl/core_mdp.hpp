#pragma once

// Finite metric MDPs, state distributions and deterministic model classes.

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lipmbrl {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Tolerance for probability invariants checked on freshly built inputs.
inline constexpr double kConstructionTol = 1e-12;
/// Tolerance for probability invariants after chains of floating-point arithmetic.
inline constexpr double kArithmeticTol = 1e-9;

/// A transition kernel for one action: rows are source states, columns destinations.
using Kernel = Matrix;
/// A deterministic map over states, f[s] = s'.
using StateMap = std::vector<Index>;

// *******************************************************
// Distribution
// *******************************************************

/// Probability vector over a finite state space.
class Distribution {
public:
    Distribution() = default;

    /// Throws std::invalid_argument when the mass has negative or non-finite
    /// entries or does not sum to one within `tol`.
    explicit Distribution(Vector mass, double tol = kConstructionTol) : mass_(std::move(mass)) {
        if (mass_.size() == 0)
            throw std::invalid_argument("distribution must have at least one state");
        for (Index i = 0; i < mass_.size(); ++i) {
            if (!std::isfinite(mass_[i]) || mass_[i] < 0.0) {
                std::ostringstream msg;
                msg << "distribution entry " << i << " is negative or non-finite (" << mass_[i] << ")";
                throw std::invalid_argument(msg.str());
            }
        }
        const double total = mass_.sum();
        if (std::abs(total - 1.0) > tol) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "distribution sums to " << total << ", not 1";
            throw std::invalid_argument(msg.str());
        }
    }

    static Distribution dirac(Index n, Index state) {
        if (state < 0 || state >= n) throw std::out_of_range("dirac state index out of range");
        Vector m = Vector::Zero(n);
        m[state] = 1.0;
        return Distribution(std::move(m));
    }

    static Distribution uniform(Index n) {
        if (n <= 0) throw std::invalid_argument("uniform distribution needs n > 0");
        return Distribution(Vector::Constant(n, 1.0 / static_cast<double>(n)));
    }

    const Vector& mass() const noexcept { return mass_; }
    Index size() const noexcept { return mass_.size(); }
    double operator[](Index i) const { return mass_[i]; }

    friend bool operator==(const Distribution& a, const Distribution& b) {
        return a.mass_.size() == b.mass_.size() && a.mass_ == b.mass_;
    }

private:
    Vector mass_;
};

// *******************************************************
// Metric
// *******************************************************

/// Ground metric on a finite state set, stored as an explicit distance matrix.
/// Construction does not validate; call violations() or use Metric::checked.
class Metric {
public:
    Metric() = default;
    explicit Metric(Matrix distances) : d_(std::move(distances)) {}

    /// Builds a metric and throws std::invalid_argument if any axiom fails.
    static Metric checked(Matrix distances) {
        Metric m(std::move(distances));
        const auto report = m.violations();
        if (!report.empty()) throw std::invalid_argument("invalid metric: " + report.front());
        return m;
    }

    /// |x_i - x_j| over the given support points.
    static Metric line(std::span<const double> points) {
        const auto n = static_cast<Index>(points.size());
        Matrix d(n, n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) d(i, j) = std::abs(points[i] - points[j]);
        return Metric(std::move(d));
    }

    /// |i - j| on state indices.
    static Metric index_line(Index n) {
        std::vector<double> pts(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) pts[static_cast<std::size_t>(i)] = static_cast<double>(i);
        return line(pts);
    }

    /// Lists every violated metric axiom; empty when the matrix is a metric.
    std::vector<std::string> violations(double tol = kConstructionTol) const {
        std::vector<std::string> out;
        const Index n = d_.rows();
        if (d_.cols() != n) {
            out.push_back("metric matrix is not square");
            return out;
        }
        for (Index i = 0; i < n; ++i) {
            if (d_(i, i) != 0.0) out.push_back("metric d(" + std::to_string(i) + "," + std::to_string(i) + ") is not zero");
            for (Index j = 0; j < n; ++j) {
                if (!std::isfinite(d_(i, j))) {
                    out.push_back("metric d(" + std::to_string(i) + "," + std::to_string(j) + ") is not finite");
                    continue;
                }
                if (i != j && d_(i, j) <= 0.0)
                    out.push_back("metric d(" + std::to_string(i) + "," + std::to_string(j) + ") is not positive");
                if (j > i && std::abs(d_(i, j) - d_(j, i)) > tol)
                    out.push_back("metric is not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
        const double scale = std::max(1.0, d_.cwiseAbs().maxCoeff());
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                for (Index k = 0; k < n; ++k)
                    if (d_(i, k) > d_(i, j) + d_(j, k) + tol * scale) {
                        std::ostringstream msg;
                        msg << "triangle inequality violated: d(" << i << "," << k << ")=" << d_(i, k) << " > d(" << i
                            << "," << j << ")+d(" << j << "," << k << ")=" << d_(i, j) + d_(j, k);
                        out.push_back(msg.str());
                    }
        return out;
    }

    const Matrix& distances() const noexcept { return d_; }
    Index size() const noexcept { return d_.rows(); }
    double operator()(Index i, Index j) const { return d_(i, j); }
    double diameter() const { return d_.size() == 0 ? 0.0 : d_.maxCoeff(); }

    Metric scaled(double factor) const { return Metric(d_ * factor); }

private:
    Matrix d_;
};

// *******************************************************
// FiniteMetricMDP
// *******************************************************

/// Finite MDP over a metric state space. Rewards are per state; an optional
/// (state, action) reward matrix overrides them where a backup needs R(s,a).
class FiniteMetricMDP {
public:
    FiniteMetricMDP() = default;
    FiniteMetricMDP(std::vector<Kernel> transitions, Vector rewards, double discount, Metric metric,
                    std::optional<Matrix> action_rewards = std::nullopt)
        : transitions_(std::move(transitions)),
          rewards_(std::move(rewards)),
          action_rewards_(std::move(action_rewards)),
          discount_(discount),
          metric_(std::move(metric)) {}

    Index n_states() const noexcept { return transitions_.empty() ? rewards_.size() : transitions_.front().rows(); }
    Index n_actions() const noexcept { return static_cast<Index>(transitions_.size()); }

    const std::vector<Kernel>& transitions() const noexcept { return transitions_; }
    const Kernel& kernel(Index action) const {
        if (action < 0 || action >= n_actions())
            throw std::out_of_range("action index " + std::to_string(action) + " out of range");
        return transitions_[static_cast<std::size_t>(action)];
    }
    const Vector& rewards() const noexcept { return rewards_; }
    const std::optional<Matrix>& action_rewards() const noexcept { return action_rewards_; }
    double discount() const noexcept { return discount_; }
    const Metric& metric() const noexcept { return metric_; }

    /// R(s,a); state rewards are broadcast across actions when no matrix is set.
    Matrix reward_matrix() const {
        if (action_rewards_) return *action_rewards_;
        return rewards_.replicate(1, n_actions());
    }

    FiniteMetricMDP with_transitions(std::vector<Kernel> transitions) const {
        FiniteMetricMDP copy = *this;
        copy.transitions_ = std::move(transitions);
        return copy;
    }
    FiniteMetricMDP with_discount(double discount) const {
        FiniteMetricMDP copy = *this;
        copy.discount_ = discount;
        return copy;
    }

private:
    std::vector<Kernel> transitions_;
    Vector rewards_;
    std::optional<Matrix> action_rewards_;
    double discount_ = 0.0;
    Metric metric_;
};

/// Checks one kernel for row-stochasticity; appends messages prefixed by `label`.
inline void kernel_violations(const Kernel& k, const std::string& label, std::vector<std::string>& out,
                              double tol = kConstructionTol) {
    for (Index s = 0; s < k.rows(); ++s) {
        double total = 0.0;
        bool bad_entry = false;
        for (Index t = 0; t < k.cols(); ++t) {
            if (!std::isfinite(k(s, t)) || k(s, t) < 0.0) bad_entry = true;
            total += k(s, t);
        }
        if (bad_entry) out.push_back(label + " row " + std::to_string(s) + " has a negative or non-finite entry");
        if (std::abs(total - 1.0) > tol) {
            std::ostringstream msg;
            msg.precision(17);
            msg << label << " row " << s << " sums to " << total;
            out.push_back(msg.str());
        }
    }
}

/// Returns every violated invariant of `mdp`; an empty report means valid.
inline std::vector<std::string> validate(const FiniteMetricMDP& mdp) {
    std::vector<std::string> out;
    const Index n = mdp.n_states();
    if (n <= 0) out.push_back("n_states must be positive");
    if (mdp.n_actions() <= 0) out.push_back("n_actions must be positive");
    for (Index a = 0; a < mdp.n_actions(); ++a) {
        const Kernel& k = mdp.transitions()[static_cast<std::size_t>(a)];
        const std::string label = "transition (action " + std::to_string(a) + ")";
        if (k.rows() != n || k.cols() != n) {
            out.push_back(label + " is not " + std::to_string(n) + "x" + std::to_string(n));
            continue;
        }
        kernel_violations(k, label, out);
    }
    if (mdp.rewards().size() != n) out.push_back("rewards length does not match n_states");
    for (Index i = 0; i < mdp.rewards().size(); ++i)
        if (!std::isfinite(mdp.rewards()[i])) out.push_back("reward " + std::to_string(i) + " is not finite");
    if (const auto& ar = mdp.action_rewards()) {
        if (ar->rows() != n || ar->cols() != mdp.n_actions())
            out.push_back("action reward matrix is not n_states x n_actions");
        else if (!ar->allFinite())
            out.push_back("action reward matrix has non-finite entries");
    }
    if (!(mdp.discount() >= 0.0 && mdp.discount() < 1.0)) out.push_back("discount must lie in [0,1)");
    if (mdp.metric().size() != n) out.push_back("metric size does not match n_states");
    else
        for (auto& v : mdp.metric().violations()) out.push_back(std::move(v));
    return out;
}

/// Throws std::invalid_argument carrying the first violation.
inline void require_valid(const FiniteMetricMDP& mdp) {
    const auto report = validate(mdp);
    if (!report.empty()) throw std::invalid_argument("invalid MDP: " + report.front());
}

// *******************************************************
// Push-forward
// *******************************************************

/// nu[s'] = sum_s K(s'|s) mu[s].
inline Distribution push_forward(const Kernel& kernel, const Distribution& mu) {
    if (kernel.rows() != mu.size() || kernel.cols() != mu.size())
        throw std::invalid_argument("kernel and distribution sizes differ");
    Vector nu = kernel.transpose() * mu.mass();
    return Distribution(std::move(nu), kArithmeticTol);
}

inline Distribution push_forward(const FiniteMetricMDP& mdp, const Distribution& mu, Index action) {
    return push_forward(mdp.kernel(action), mu);
}

/// Applies push_forward for a_0, ..., a_{n-1} in order.
inline Distribution push_forward_n(const FiniteMetricMDP& mdp, const Distribution& mu, std::span<const Index> actions) {
    if (actions.empty()) throw std::invalid_argument("push_forward_n needs a nonempty action sequence");
    Distribution out = mu;
    for (Index a : actions) out = push_forward(mdp, out, a);
    return out;
}

inline Distribution push_forward_n(const std::vector<Kernel>& kernels, const Distribution& mu,
                                   std::span<const Index> actions) {
    if (actions.empty()) throw std::invalid_argument("push_forward_n needs a nonempty action sequence");
    Distribution out = mu;
    for (Index a : actions) {
        if (a < 0 || a >= static_cast<Index>(kernels.size())) throw std::out_of_range("action index out of range");
        out = push_forward(kernels[static_cast<std::size_t>(a)], out);
    }
    return out;
}

// *******************************************************
// DeterministicModelClass
// *******************************************************

/// A finite set of deterministic state maps with an action-conditioned
/// distribution over them: weights(a, i) = g(f_i | a).
class DeterministicModelClass {
public:
    DeterministicModelClass() = default;

    /// Throws std::invalid_argument on an out-of-range map entry or a weights
    /// row that is not a probability vector.
    DeterministicModelClass(Index n_states, std::vector<StateMap> maps, Matrix weights)
        : n_states_(n_states), maps_(std::move(maps)), weights_(std::move(weights)) {
        if (n_states_ <= 0) throw std::invalid_argument("model class needs n_states > 0");
        if (maps_.empty()) throw std::invalid_argument("model class needs at least one map");
        if (weights_.cols() != static_cast<Index>(maps_.size()) || weights_.rows() <= 0)
            throw std::invalid_argument("weights must be n_actions x n_maps");
        for (std::size_t i = 0; i < maps_.size(); ++i) {
            if (static_cast<Index>(maps_[i].size()) != n_states_)
                throw std::invalid_argument("map " + std::to_string(i) + " has the wrong length");
            for (Index s : maps_[i])
                if (s < 0 || s >= n_states_)
                    throw std::invalid_argument("map " + std::to_string(i) + " points outside the state set");
        }
        for (Index a = 0; a < weights_.rows(); ++a) {
            if ((weights_.row(a).array() < 0.0).any() || !weights_.row(a).allFinite())
                throw std::invalid_argument("weights row " + std::to_string(a) + " has a negative entry");
            if (std::abs(weights_.row(a).sum() - 1.0) > kConstructionTol)
                throw std::invalid_argument("weights row " + std::to_string(a) + " does not sum to 1");
        }
    }

    Index n_states() const noexcept { return n_states_; }
    Index n_actions() const noexcept { return weights_.rows(); }
    Index n_maps() const noexcept { return static_cast<Index>(maps_.size()); }
    const std::vector<StateMap>& maps() const noexcept { return maps_; }
    const Matrix& weights() const noexcept { return weights_; }

private:
    Index n_states_ = 0;
    std::vector<StateMap> maps_;
    Matrix weights_;
};

/// T(s'|s,a) = sum_f 1(f(s) = s') g(f|a), one kernel per action.
inline std::vector<Kernel> model_class_to_kernel(const DeterministicModelClass& model) {
    const Index n = model.n_states();
    std::vector<Kernel> out;
    out.reserve(static_cast<std::size_t>(model.n_actions()));
    for (Index a = 0; a < model.n_actions(); ++a) {
        Kernel k = Kernel::Zero(n, n);
        for (Index i = 0; i < model.n_maps(); ++i) {
            const double w = model.weights()(a, i);
            if (w == 0.0) continue;
            const StateMap& f = model.maps()[static_cast<std::size_t>(i)];
            for (Index s = 0; s < n; ++s) k(s, f[static_cast<std::size_t>(s)]) += w;
        }
        out.push_back(std::move(k));
    }
    return out;
}

}  // namespace lipmbrl
