#pragma once

// Seeded random instances and the study harnesses: model-error versus
// value-error correlation on random MRPs, multi-step error growth, and the
// linear scalar case where both error bounds are attained.

#include "lipmbrl/core_mdp.hpp"
#include "lipmbrl/gvi.hpp"
#include "lipmbrl/lipschitz.hpp"
#include "lipmbrl/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace lipmbrl {

// *******************************************************
// Seeding and parallel trials
// *******************************************************

/// splitmix64 finalizer; spreads consecutive seeds across the state space.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed of stream `index` under `master`; independent of thread scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return mix_seed(mix_seed(master) ^ mix_seed(index + 0x5851f42d4c957f2dULL));
}

/// Runs body(i) for i in [0, count) on up to `threads` workers. The first
/// exception thrown by any task is rethrown after all workers join.
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

// *******************************************************
// Random instances
// *******************************************************

/// Row-stochastic matrix with flat-Dirichlet rows (normalized unit exponentials).
inline Kernel random_kernel(Index n, std::mt19937_64& rng) {
    std::exponential_distribution<double> e(1.0);
    Kernel k(n, n);
    for (Index s = 0; s < n; ++s) {
        for (Index t = 0; t < n; ++t) k(s, t) = e(rng);
        k.row(s) /= k.row(s).sum();
    }
    return k;
}

/// Euclidean distances between `n` points uniform in [0,1]^dim.
inline Metric random_euclidean_metric(Index n, Index dim, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix pts(n, dim);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < dim; ++j) pts(i, j) = u(rng);
    Matrix d(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) d(i, j) = (pts.row(i) - pts.row(j)).norm();
    return Metric(std::move(d));
}

inline Distribution random_distribution(Index n, std::mt19937_64& rng) {
    std::exponential_distribution<double> e(1.0);
    Vector m(n);
    for (Index i = 0; i < n; ++i) m[i] = e(rng);
    m /= m.sum();
    return Distribution(std::move(m), kArithmeticTol);
}

enum class RewardMode { uniform_0_10, index };

inline RewardMode parse_reward_mode(const std::string& s) {
    if (s == "uniform" || s == "uniform_0_10") return RewardMode::uniform_0_10;
    if (s == "index") return RewardMode::index;
    throw std::invalid_argument("unknown reward mode '" + s + "' (expected uniform or index)");
}

inline const char* reward_mode_name(RewardMode m) { return m == RewardMode::index ? "index" : "uniform"; }

/// Single-action MRP with flat-Dirichlet rows and metric |i - j|.
inline FiniteMetricMDP random_mrp(Index n_states, RewardMode mode, double gamma, std::uint64_t seed) {
    if (n_states < 2) throw std::invalid_argument("random_mrp needs at least two states");
    std::mt19937_64 rng(seed);
    Kernel k = random_kernel(n_states, rng);
    Vector r(n_states);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (Index s = 0; s < n_states; ++s) r[s] = mode == RewardMode::index ? static_cast<double>(s) : u(rng);
    return FiniteMetricMDP({std::move(k)}, std::move(r), gamma, Metric::index_line(n_states));
}

/// Multi-action MDP over random Euclidean points with (state, action) rewards in [0,1].
inline FiniteMetricMDP random_metric_mdp(Index n_states, Index n_actions, double gamma, std::mt19937_64& rng) {
    std::vector<Kernel> ks;
    for (Index a = 0; a < n_actions; ++a) ks.push_back(random_kernel(n_states, rng));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix r(n_states, n_actions);
    for (Index s = 0; s < n_states; ++s)
        for (Index a = 0; a < n_actions; ++a) r(s, a) = u(rng);
    Metric metric = random_euclidean_metric(n_states, 2, rng);
    return FiniteMetricMDP(std::move(ks), r.col(0), gamma, std::move(metric), r);
}

// *******************************************************
// Statistics
// *******************************************************

/// Pearson correlation; empty when either side has zero variance or fewer
/// than two points.
inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson needs equal-length samples");
    const std::size_t n = x.size();
    if (n < 2) return std::nullopt;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// *******************************************************
// Multi-step error growth
// *******************************************************

struct CompoundingStep {
    int n = 0;
    double empirical = 0.0;  ///< W(T_hat^n mu0, T^n mu0)
    double bound = 0.0;      ///< delta * sum_{i<n} K^i
    double recursion = 0.0;  ///< K * empirical(n-1) + delta
};

struct CompoundingReport {
    double delta = 0.0;
    double k_true = 0.0;
    double k_model = 0.0;
    double k_bar = 0.0;
    std::vector<CompoundingStep> steps;

    /// Largest amount by which an empirical value exceeds its bound (<= 0 when all hold).
    double worst_bound_excess() const {
        double w = -std::numeric_limits<double>::infinity();
        for (const auto& s : steps) w = std::max(w, s.empirical - s.bound);
        return w;
    }
    double worst_recursion_excess() const {
        double w = -std::numeric_limits<double>::infinity();
        for (const auto& s : steps) w = std::max(w, s.empirical - s.recursion);
        return w;
    }
};

/// max over states of W(model(.|s), truth(.|s)).
inline double one_step_delta(const Kernel& truth, const Kernel& model, const Metric& metric) {
    double delta = 0.0;
    for (Index s = 0; s < truth.rows(); ++s)
        delta = std::max(delta, wasserstein(Distribution(model.row(s).transpose(), kArithmeticTol),
                                            Distribution(truth.row(s).transpose(), kArithmeticTol), metric));
    return delta;
}

/// Pushes mu0 through truth and model for n = 1..horizon and compares the
/// Wasserstein gap with the multi-step bound, using K = min(K_W(truth), K_W(model)).
inline CompoundingReport compounding_study(const Kernel& truth, const Kernel& model, const Metric& metric,
                                           const Distribution& mu0, int horizon) {
    if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
    CompoundingReport out;
    out.delta = one_step_delta(truth, model, metric);
    out.k_true = kernel_wasserstein_lipschitz(truth, metric);
    out.k_model = kernel_wasserstein_lipschitz(model, metric);
    out.k_bar = std::min(out.k_true, out.k_model);
    Distribution mu_t = mu0, mu_m = mu0;
    double prev = 0.0;
    for (int n = 1; n <= horizon; ++n) {
        mu_t = push_forward(truth, mu_t);
        mu_m = push_forward(model, mu_m);
        CompoundingStep step;
        step.n = n;
        step.empirical = wasserstein(mu_m, mu_t, metric);
        step.bound = compounding_bound({out.delta, out.k_bar, 0.0, 0.0, n});
        step.recursion = out.k_bar * prev + out.delta;
        prev = step.empirical;
        out.steps.push_back(step);
    }
    return out;
}

// *******************************************************
// Correlation study
// *******************************************************

enum class Aggregation { mean, max };

inline double aggregate(const Vector& v, Aggregation a) { return a == Aggregation::mean ? v.mean() : v.maxCoeff(); }

struct StudyConfig {
    int n_trials = 1000;
    Index n_states = 10;
    std::vector<double> gammas{0.5, 0.7, 0.9, 0.95, 0.99};
    RewardMode rewards = RewardMode::index;
    std::uint64_t seed = 1;
    Aggregation model_aggregation = Aggregation::mean;
    Aggregation value_aggregation = Aggregation::mean;
    int horizon = 6;
    unsigned threads = 1;
};

struct TrialRecord {
    int index = 0;
    std::uint64_t seed = 0;
    double model_error_w = 0.0;
    double model_error_tv = 0.0;
    double model_error_kl = 0.0;  ///< may be +infinity
    double delta = 0.0;           ///< max-state one-step Wasserstein error
    double k_bar = 0.0;
    double k_r = 0.0;
    std::vector<double> value_error;      ///< per gamma, aggregated per StudyConfig
    std::vector<double> value_error_max;  ///< per gamma, max over states
    std::vector<double> bound_value;       ///< per gamma; +infinity where gamma * K >= 1
    std::vector<double> empirical_delta;  ///< per horizon step, from the uniform start
    std::vector<double> bound_compounding;       ///< per horizon step
    /// min(0.99, 0.9 / K): a discount where the value bound always applies.
    double gamma_edge = 0.0;
    double value_error_edge_max = 0.0;
    double bound_value_edge = 0.0;
};

struct CorrelationSummary {
    double gamma = 0.0;
    std::optional<double> corr_w, corr_tv, corr_kl;
    int n_trials = 0;
    int kl_excluded = 0;
};

struct StudyResult {
    std::vector<TrialRecord> trials;
    std::vector<CorrelationSummary> summaries;
};

/// One trial: an MRP and an independent random model from separate streams.
inline TrialRecord run_trial(const StudyConfig& cfg, int index) {
    TrialRecord rec;
    rec.index = index;
    rec.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(index));
    const FiniteMetricMDP mdp = random_mrp(cfg.n_states, cfg.rewards, 0.0, derive_seed(rec.seed, 0));
    std::mt19937_64 model_rng(derive_seed(rec.seed, 1));
    const Kernel model = random_kernel(cfg.n_states, model_rng);
    const Kernel& truth = mdp.kernel(0);
    const Metric& metric = mdp.metric();

    Vector w(cfg.n_states), tv(cfg.n_states), kl(cfg.n_states);
    for (Index s = 0; s < cfg.n_states; ++s) {
        const Distribution p(truth.row(s).transpose(), kArithmeticTol);
        const Distribution q(model.row(s).transpose(), kArithmeticTol);
        w[s] = wasserstein(q, p, metric);
        tv[s] = total_variation(q, p);
        kl[s] = kl_divergence(p, q);
    }
    rec.model_error_w = aggregate(w, cfg.model_aggregation);
    rec.model_error_tv = aggregate(tv, cfg.model_aggregation);
    rec.model_error_kl = aggregate(kl, cfg.model_aggregation);

    const CompoundingReport comp =
        compounding_study(truth, model, metric, Distribution::uniform(cfg.n_states), cfg.horizon);
    rec.delta = comp.delta;
    rec.k_bar = comp.k_bar;
    rec.k_r = function_lipschitz(mdp.rewards(), metric);
    for (const auto& s : comp.steps) {
        rec.empirical_delta.push_back(s.empirical);
        rec.bound_compounding.push_back(s.bound);
    }
    for (double gamma : cfg.gammas) {
        const Vector gap = (mrp_value(truth, mdp.rewards(), gamma) - mrp_value(model, mdp.rewards(), gamma)).cwiseAbs();
        rec.value_error.push_back(aggregate(gap, cfg.value_aggregation));
        rec.value_error_max.push_back(gap.maxCoeff());
        rec.bound_value.push_back(gamma * rec.k_bar < 1.0
                                     ? value_bound({rec.delta, rec.k_bar, rec.k_r, gamma, 1})
                                     : std::numeric_limits<double>::infinity());
    }
    rec.gamma_edge = rec.k_bar > 0.0 ? std::min(0.99, 0.9 / rec.k_bar) : 0.99;
    rec.value_error_edge_max = (mrp_value(truth, mdp.rewards(), rec.gamma_edge) -
                                mrp_value(model, mdp.rewards(), rec.gamma_edge))
                                   .cwiseAbs()
                                   .maxCoeff();
    rec.bound_value_edge = value_bound({rec.delta, rec.k_bar, rec.k_r, rec.gamma_edge, 1});
    return rec;
}

inline std::vector<CorrelationSummary> summarize(const std::vector<TrialRecord>& trials,
                                                 const std::vector<double>& gammas) {
    std::vector<CorrelationSummary> out;
    for (std::size_t g = 0; g < gammas.size(); ++g) {
        CorrelationSummary s;
        s.gamma = gammas[g];
        s.n_trials = static_cast<int>(trials.size());
        std::vector<double> w, tv, value, kl, kl_value;
        for (const TrialRecord& t : trials) {
            w.push_back(t.model_error_w);
            tv.push_back(t.model_error_tv);
            value.push_back(t.value_error[g]);
            if (std::isfinite(t.model_error_kl)) {
                kl.push_back(t.model_error_kl);
                kl_value.push_back(t.value_error[g]);
            } else {
                ++s.kl_excluded;
            }
        }
        s.corr_w = pearson(w, value);
        s.corr_tv = pearson(tv, value);
        s.corr_kl = pearson(kl, kl_value);
        out.push_back(s);
    }
    return out;
}

inline StudyResult metric_correlation_study(const StudyConfig& cfg) {
    if (cfg.n_trials < 30) throw std::invalid_argument("correlation study needs at least 30 trials");
    if (cfg.gammas.empty()) throw std::invalid_argument("correlation study needs at least one gamma");
    for (double g : cfg.gammas)
        if (!(g >= 0.0 && g < 1.0)) throw std::invalid_argument("every gamma must lie in [0,1)");
    StudyResult out;
    out.trials.resize(static_cast<std::size_t>(cfg.n_trials));
    parallel_for(out.trials.size(), cfg.threads,
                 [&](std::size_t i) { out.trials[i] = run_trial(cfg, static_cast<int>(i)); });
    out.summaries = summarize(out.trials, cfg.gammas);
    return out;
}

// *******************************************************
// Linear scalar case
// *******************************************************

struct LinearCaseInputs {
    double k = 0.5;
    double delta = 0.1;
    double gamma = 0.9;
    double k_r = 1.0;
    int horizon = 6;
    /// Snapped variant: grid spacing and half-width of the grid around 0.
    double grid_step = 1e-3;
    double span = 4.0;
};

struct LinearStep {
    int n = 0;
    double gap = 0.0;          ///< |T^n(0) - T_hat^n(0)| by iterating the maps
    double formula = 0.0;      ///< delta * sum_{i<n} K^i
    double snapped_gap = 0.0;  ///< W between grid-snapped n-step Diracs
    double snapped_tol = 0.0;  ///< accumulated snapping error allowance
};

struct LinearCaseReport {
    std::vector<LinearStep> steps;
    double value_gap_series = 0.0;
    double value_gap_formula = 0.0;
    int series_terms = 0;
};

/// T(x) = K x and T_hat(x) = K x + delta from x = 0 with R(x) = K_R x, where
/// both error bounds hold with equality.
inline LinearCaseReport linear_tightness_case(const LinearCaseInputs& in) {
    if (!(in.gamma >= 0.0 && in.gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0,1)");
    if (in.gamma * in.k >= 1.0) throw BoundInapplicable("linear case needs gamma * K < 1");
    if (!(in.k >= 0.0) || !(in.delta >= 0.0) || in.horizon < 1) throw std::invalid_argument("invalid linear case");
    if (!(in.grid_step > 0.0) || !(in.span > 0.0)) throw std::invalid_argument("invalid grid");
    LinearCaseReport out;

    // Grid x_i = lo + i h; maps snap to the nearest point and clamp at the ends.
    const auto n_grid = static_cast<Index>(std::llround(2.0 * in.span / in.grid_step)) + 1;
    const double lo = -in.span;
    auto snap = [&](double x) {
        const auto i = static_cast<Index>(std::llround((x - lo) / in.grid_step));
        return std::clamp<Index>(i, 0, n_grid - 1);
    };
    std::vector<double> points(static_cast<std::size_t>(n_grid));
    for (Index i = 0; i < n_grid; ++i) points[static_cast<std::size_t>(i)] = lo + static_cast<double>(i) * in.grid_step;
    StateMap f_true(static_cast<std::size_t>(n_grid)), f_model(static_cast<std::size_t>(n_grid));
    for (Index i = 0; i < n_grid; ++i) {
        const double x = points[static_cast<std::size_t>(i)];
        f_true[static_cast<std::size_t>(i)] = snap(in.k * x);
        f_model[static_cast<std::size_t>(i)] = snap(in.k * x + in.delta);
    }
    const Index origin = snap(0.0);

    double x_true = 0.0, x_model = 0.0, geometric = 0.0, power = 1.0;
    Index g_true = origin, g_model = origin;
    for (int n = 1; n <= in.horizon; ++n) {
        x_true = in.k * x_true;
        x_model = in.k * x_model + in.delta;
        g_true = f_true[static_cast<std::size_t>(g_true)];
        g_model = f_model[static_cast<std::size_t>(g_model)];
        geometric += power;
        power *= in.k;
        LinearStep s;
        s.n = n;
        s.gap = std::abs(x_model - x_true);
        s.formula = in.delta * geometric;
        // Dirac transport cost on the line is the distance between the points.
        s.snapped_gap = std::abs(points[static_cast<std::size_t>(g_model)] - points[static_cast<std::size_t>(g_true)]);
        s.snapped_tol = in.grid_step * geometric;
        out.steps.push_back(s);
    }

    // v(0) - v_hat(0) = sum_n gamma^n K_R (T^n(0) - T_hat^n(0)), summed until terms vanish.
    double xt = 0.0, xm = 0.0, discount = 1.0, total = 0.0;
    for (int n = 0; n < 1000000; ++n) {
        const double term = discount * in.k_r * std::abs(xm - xt);
        total += term;
        out.series_terms = n + 1;
        if (n > 0 && term <= std::numeric_limits<double>::epsilon() * total) break;
        xt = in.k * xt;
        xm = in.k * xm + in.delta;
        discount *= in.gamma;
    }
    out.value_gap_series = total;
    out.value_gap_formula = value_bound({in.delta, in.k, in.k_r, in.gamma, 1});
    return out;
}

}  // namespace lipmbrl
