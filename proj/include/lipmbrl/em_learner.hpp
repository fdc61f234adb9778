#pragma once

// EM for a mixture of scalar regression networks with a shared fixed Gaussian
// noise level: responsibilities in the E-step, weighted regression plus
// Lipschitz projection in the M-step.

#include "lipmbrl/core_mdp.hpp"
#include "lipmbrl/layered_net.hpp"
#include "lipmbrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace lipmbrl {

struct MixtureModel {
    std::vector<LayeredNet> components;
    Vector mixing;
    double sigma = 0.1;

    Index size() const noexcept { return static_cast<Index>(components.size()); }

    void validate() const {
        if (components.empty()) throw std::invalid_argument("mixture needs at least one component");
        if (mixing.size() != size()) throw std::invalid_argument("mixing size differs from component count");
        if ((mixing.array() < 0.0).any() || std::abs(mixing.sum() - 1.0) > kConstructionTol)
            throw std::invalid_argument("mixing is not a probability vector");
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be positive");
    }
};

/// q(i, f): posterior of component f for sample i. Rows sum to one.
struct Responsibilities {
    Matrix q;
    /// Samples where no component had a finite likelihood; they get uniform rows.
    long degenerate_rows = 0;
};

namespace detail {

inline double log_gaussian(double y, double mean, double sigma) {
    const double z = (y - mean) / sigma;
    return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

/// log g(f) + log N(y_i; f(x_i), sigma^2), samples by rows.
inline Matrix joint_log_likelihood(const MixtureModel& model, const std::vector<Sample>& data) {
    const auto n = static_cast<Index>(data.size());
    Matrix out(n, model.size());
    for (Index f = 0; f < model.size(); ++f) {
        const LayeredNet& net = model.components[static_cast<std::size_t>(f)];
        const double log_g = std::log(model.mixing[f]);
        for (Index i = 0; i < n; ++i) {
            const Sample& s = data[static_cast<std::size_t>(i)];
            out(i, f) = log_g + log_gaussian(s.y, net(s.x), model.sigma);
        }
    }
    return out;
}

}  // namespace detail

/// q(f | x, y) proportional to N(y; f(x), sigma^2) g(f), normalized in log space.
inline Responsibilities e_step(const MixtureModel& model, const std::vector<Sample>& data) {
    model.validate();
    if (data.empty()) throw std::invalid_argument("e_step needs data");
    const Matrix logp = detail::joint_log_likelihood(model, data);
    Responsibilities out;
    out.q = Matrix::Zero(logp.rows(), logp.cols());
    for (Index i = 0; i < logp.rows(); ++i) {
        double hi = -std::numeric_limits<double>::infinity();
        for (Index f = 0; f < logp.cols(); ++f)
            if (std::isfinite(logp(i, f))) hi = std::max(hi, logp(i, f));
        if (!std::isfinite(hi)) {
            out.q.row(i).setConstant(1.0 / static_cast<double>(logp.cols()));
            ++out.degenerate_rows;
            continue;
        }
        double total = 0.0;
        for (Index f = 0; f < logp.cols(); ++f) {
            const double e = std::isfinite(logp(i, f)) ? std::exp(logp(i, f) - hi) : 0.0;
            out.q(i, f) = e;
            total += e;
        }
        out.q.row(i) /= total;
    }
    return out;
}

/// sum_i sum_f q [log g + log N - log q]; terms with q = 0 contribute nothing.
/// At the responsibilities returned by e_step this equals the data log-likelihood.
inline double elbo(const MixtureModel& model, const std::vector<Sample>& data, const Responsibilities& r) {
    const Matrix logp = detail::joint_log_likelihood(model, data);
    double total = 0.0;
    for (Index i = 0; i < logp.rows(); ++i)
        for (Index f = 0; f < logp.cols(); ++f) {
            const double q = r.q(i, f);
            if (q > 0.0) total += q * (logp(i, f) - std::log(q));
        }
    return total;
}

/// sum_i sum_f q(i,f) (y_i - f(x_i))^2 / N.
inline double weighted_mse(const MixtureModel& model, const std::vector<Sample>& data, const Responsibilities& r) {
    double total = 0.0;
    for (Index f = 0; f < model.size(); ++f)
        total += 2.0 * weighted_squared_loss(model.components[static_cast<std::size_t>(f)], data, r.q.col(f));
    return total / static_cast<double>(data.size());
}

struct MStepOptions {
    int steps = 50;
    double learn_rate = 0.01;
    /// Per-layer cap on matrix_lipschitz; +infinity leaves the weights unconstrained.
    double cap = std::numeric_limits<double>::infinity();
    NormP norm = NormP::inf;
    ConstraintMode mode = ConstraintMode::project;
    /// Halvings tried before a step is abandoned.
    int max_halvings = 30;
    /// Descend the mass-normalized weighted MSE instead of the raw weighted
    /// negative log-likelihood.
    bool normalize_by_mass = false;
};

/// Updates g to the mean responsibility and runs projected gradient descent on
/// each component's responsibility-weighted squared error. A step that does not
/// lower the loss is retried at half the rate, so the expected complete-data
/// log-likelihood never decreases.
inline MixtureModel m_step(const MixtureModel& model, const std::vector<Sample>& data, const Responsibilities& r,
                           const MStepOptions& opts) {
    model.validate();
    if (r.q.rows() != static_cast<Index>(data.size()) || r.q.cols() != model.size())
        throw std::invalid_argument("responsibilities do not match data and model");
    if (!(opts.learn_rate > 0.0)) throw std::invalid_argument("learn rate must be positive");
    if (!(opts.cap > 0.0)) throw std::invalid_argument("Lipschitz cap must be positive");

    MixtureModel out = model;
    const double n = static_cast<double>(data.size());
    out.mixing = r.q.colwise().sum().transpose() / n;
    out.mixing /= out.mixing.sum();

    for (Index f = 0; f < model.size(); ++f) {
        LayeredNet& net = out.components[static_cast<std::size_t>(f)];
        const Vector w_raw = r.q.col(f);
        const double mass = w_raw.sum();
        if (!(mass > 0.0)) continue;
        // Loss sum_i q (y - f)^2 / (2 sigma^2), optionally divided by the
        // component's mass; the argmin is the same either way.
        const Vector w = opts.normalize_by_mass ? Vector(w_raw / mass) : Vector(w_raw / (model.sigma * model.sigma));
        double loss = weighted_squared_loss(net, data, w);
        if (!std::isfinite(loss)) {
            std::ostringstream msg;
            msg << "component " << f << " has a non-finite loss before the M-step";
            throw std::runtime_error(msg.str());
        }
        for (int step = 0; step < opts.steps; ++step) {
            const Vector g = weighted_squared_loss_gradient(net, data, w);
            if (!g.allFinite()) {
                std::ostringstream msg;
                msg << "component " << f << " has a non-finite gradient at step " << step
                    << "; lower the learn rate";
                throw std::runtime_error(msg.str());
            }
            const Vector theta = net.parameters();
            double rate = opts.learn_rate;
            bool accepted = false;
            for (int h = 0; h <= opts.max_halvings; ++h, rate *= 0.5) {
                LayeredNet trial = net;
                trial.set_parameters(theta - rate * g);
                project_network(trial, opts.cap, opts.norm, opts.mode);
                const double trial_loss = weighted_squared_loss(trial, data, w);
                if (std::isfinite(trial_loss) && trial_loss <= loss) {
                    net = std::move(trial);
                    loss = trial_loss;
                    accepted = true;
                    break;
                }
            }
            if (!accepted) break;  // no descent direction left at this resolution
        }
    }
    return out;
}

/// How component output biases start.
enum class BiasInit {
    zero,
    /// Component j starts at the (j + 1/2)/m quantile of the targets.
    target_quantiles,
};

struct EmOptions {
    int n_components = 5;
    int hidden = 16;
    double sigma = 0.1;
    int em_iters = 50;
    MStepOptions m_step;
    BiasInit bias_init = BiasInit::zero;
    std::uint64_t seed = 1;
};

struct EmFitResult {
    MixtureModel model;
    /// ELBO after each E-step; the last entry scores the final model.
    std::vector<double> elbo;
    /// Responsibility-weighted MSE after each M-step.
    std::vector<double> weighted_mse;
    long degenerate_rows = 0;
};

inline MixtureModel initial_mixture(const std::vector<Sample>& data, const EmOptions& opts) {
    if (opts.n_components < 1) throw std::invalid_argument("need at least one component");
    if (opts.hidden < 1) throw std::invalid_argument("hidden width must be positive");
    if (data.empty()) throw std::invalid_argument("em needs data");
    std::mt19937_64 rng(opts.seed);
    MixtureModel model;
    model.sigma = opts.sigma;
    model.mixing = Vector::Constant(opts.n_components, 1.0 / opts.n_components);
    std::vector<double> ys;
    for (const Sample& s : data) ys.push_back(s.y);
    std::sort(ys.begin(), ys.end());
    for (int j = 0; j < opts.n_components; ++j) {
        LayeredNet net = LayeredNet::random_mlp({1, opts.hidden, 1}, rng);
        if (opts.bias_init == BiasInit::target_quantiles) {
            const double pos = (j + 0.5) / opts.n_components * static_cast<double>(ys.size());
            net.layers().back().bias[0] = ys[std::min(ys.size() - 1, static_cast<std::size_t>(pos))];
        }
        project_network(net, opts.m_step.cap, opts.m_step.norm, opts.m_step.mode);
        model.components.push_back(std::move(net));
    }
    model.validate();
    return model;
}

/// Alternates e_step and m_step for em_iters rounds from a seeded initialization.
inline EmFitResult em_fit(const std::vector<Sample>& data, const EmOptions& opts) {
    EmFitResult out;
    out.model = initial_mixture(data, opts);
    for (int it = 0; it < opts.em_iters; ++it) {
        const Responsibilities r = e_step(out.model, data);
        out.degenerate_rows += r.degenerate_rows;
        out.elbo.push_back(elbo(out.model, data, r));
        out.model = m_step(out.model, data, r, opts.m_step);
        out.weighted_mse.push_back(weighted_mse(out.model, data, r));
    }
    const Responsibilities r = e_step(out.model, data);
    out.degenerate_rows += r.degenerate_rows;
    out.elbo.push_back(elbo(out.model, data, r));
    return out;
}

// *******************************************************
// Supervised five-function domain
// *******************************************************

using ScalarFn = std::function<double(double)>;

inline std::vector<ScalarFn> five_function_truth() {
    return {
        [](double x) { return std::tanh(x) + 3.0; },
        [](double x) { return x * x; },
        [](double x) { return std::sin(x) - 5.0; },
        [](double x) { return std::sin(x) - 3.0; },
        [](double x) { return std::sin(x) * std::sin(x); },
    };
}

/// `per_function` samples of each truth function with x uniform on [lo, hi].
inline std::vector<Sample> sample_functions(const std::vector<ScalarFn>& truth, int per_function, double lo, double hi,
                                            std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<Sample> out;
    for (const ScalarFn& fn : truth)
        for (int i = 0; i < per_function; ++i) {
            const double x = u(rng);
            out.push_back({x, fn(x)});
        }
    return out;
}

inline std::vector<double> linspace(double lo, double hi, int count) {
    if (count < 1) throw std::invalid_argument("linspace needs a positive count");
    std::vector<double> out(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        out[static_cast<std::size_t>(i)] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
    return out;
}

/// Mean over test inputs of W1 between {(f_j(x), g_j)} and {(f*_i(x), 1/m)}.
inline double mixture_wasserstein_loss(const MixtureModel& model, const std::vector<ScalarFn>& truth,
                                       const std::vector<double>& test_inputs) {
    model.validate();
    if (truth.empty() || test_inputs.empty()) throw std::invalid_argument("need truth functions and test inputs");
    double total = 0.0;
    const double w_true = 1.0 / static_cast<double>(truth.size());
    for (double x : test_inputs) {
        std::vector<WeightedPoint> pred, real;
        for (Index j = 0; j < model.size(); ++j)
            pred.push_back({model.components[static_cast<std::size_t>(j)](x), model.mixing[j]});
        for (const ScalarFn& fn : truth) real.push_back({fn(x), w_true});
        total += wasserstein_1d(std::move(pred), std::move(real));
    }
    return total / static_cast<double>(test_inputs.size());
}

}  // namespace lipmbrl
