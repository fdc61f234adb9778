#pragma once

// The acceptance suite: every criterion as a seeded, self-contained check
// returning pass/fail with the measured quantity. Shared by the acceptance
// test binary and the CLI's run-all command.

#include "lipmbrl/lipmbrl.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace lipmbrl {

struct AcceptanceConfig {
    std::uint64_t seed = 1;
    unsigned threads = 1;
    int correlation_trials = 1000;
    Index correlation_states = 10;
    std::vector<double> gammas{0.5, 0.7, 0.9, 0.95, 0.99};
    /// Lipschitz caps for the EM comparison.
    double em_small_cap = 0.05;
    double em_mid_cap = 1.0;
    std::vector<std::uint64_t> em_seeds{1, 2, 3, 4, 5};
    std::uint64_t em_data_seed = 7;
    EmOptions em;
    int em_test_points = 41;
    /// GVI stopping tolerance for the value Lipschitz criterion.
    double gvi_tolerance = 1e-10;

    void validate() const {
        if (!(gvi_tolerance > 0.0)) throw std::invalid_argument("gvi_tolerance must be positive");
        if (correlation_trials < 30) throw std::invalid_argument("correlation_trials must be at least 30");
        if (correlation_states < 2) throw std::invalid_argument("correlation_states must be at least 2");
        if (em_seeds.empty()) throw std::invalid_argument("need at least one EM seed");
        if (!(em_small_cap > 0.0) || !(em_mid_cap > 0.0)) throw std::invalid_argument("EM caps must be positive");
        if (em_test_points < 1) throw std::invalid_argument("em_test_points must be positive");
        if (em.em_iters < 1 || em.m_step.steps < 0 || !(em.m_step.learn_rate > 0.0) || !(em.sigma > 0.0))
            throw std::invalid_argument("invalid EM options");
        for (double g : gammas)
            if (!(g >= 0.0 && g < 1.0)) throw std::invalid_argument("every gamma must lie in [0,1)");
    }
};

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

// *******************************************************
// Artifacts: everything run-all writes to disk
// *******************************************************

struct EmRun {
    double cap = 0.0;
    std::uint64_t seed = 0;
    double loss = 0.0;
    EmFitResult fit;
};

struct Artifacts {
    StudyResult index_study;
    StudyResult uniform_study;
    std::vector<EmRun> em_runs;
};

inline StudyConfig study_config(const AcceptanceConfig& cfg, RewardMode mode) {
    StudyConfig s;
    s.n_trials = cfg.correlation_trials;
    s.n_states = cfg.correlation_states;
    s.gammas = cfg.gammas;
    s.rewards = mode;
    s.seed = derive_seed(cfg.seed, mode == RewardMode::index ? 11 : 12);
    s.threads = cfg.threads;
    return s;
}

inline std::vector<double> em_caps(const AcceptanceConfig& cfg) {
    return {cfg.em_small_cap, cfg.em_mid_cap, std::numeric_limits<double>::infinity()};
}

inline Artifacts build_artifacts(const AcceptanceConfig& cfg) {
    cfg.validate();
    Artifacts a;
    a.index_study = metric_correlation_study(study_config(cfg, RewardMode::index));
    a.uniform_study = metric_correlation_study(study_config(cfg, RewardMode::uniform_0_10));

    const auto truth = five_function_truth();
    std::mt19937_64 data_rng(cfg.em_data_seed);
    const auto data = sample_functions(truth, 30, -2.0, 2.0, data_rng);
    const auto grid = linspace(-2.0, 2.0, cfg.em_test_points);
    for (double cap : em_caps(cfg))
        for (std::uint64_t seed : cfg.em_seeds) a.em_runs.push_back({cap, seed, 0.0, {}});
    parallel_for(a.em_runs.size(), cfg.threads, [&](std::size_t i) {
        EmRun& run = a.em_runs[i];
        EmOptions opts = cfg.em;
        opts.m_step.cap = run.cap;
        opts.seed = run.seed;
        run.fit = em_fit(data, opts);
        run.loss = mixture_wasserstein_loss(run.fit.model, truth, grid);
    });
    return a;
}

inline std::string trials_csv(const StudyResult& study, const std::vector<double>& gammas) {
    std::vector<std::string> header{"trial", "seed", "model_error_w", "model_error_tv", "model_error_kl",
                                    "delta",  "k_bar", "k_r"};
    for (double g : gammas) {
        header.push_back("value_error_g" + format_double(g));
        header.push_back("value_error_max_g" + format_double(g));
        header.push_back("bound_value_g" + format_double(g));
    }
    header.insert(header.end(), {"gamma_edge", "value_error_edge_max", "bound_value_edge"});
    const std::size_t horizon = study.trials.empty() ? 0 : study.trials.front().empirical_delta.size();
    for (std::size_t n = 1; n <= horizon; ++n) {
        header.push_back("delta_n" + std::to_string(n));
        header.push_back("bound_compounding_n" + std::to_string(n));
    }
    CsvWriter csv(header);
    for (const TrialRecord& t : study.trials) {
        std::vector<std::string> row{std::to_string(t.index),       std::to_string(t.seed),
                                     format_double(t.model_error_w), format_double(t.model_error_tv),
                                     format_double(t.model_error_kl), format_double(t.delta),
                                     format_double(t.k_bar),          format_double(t.k_r)};
        for (std::size_t g = 0; g < gammas.size(); ++g) {
            row.push_back(format_double(t.value_error[g]));
            row.push_back(format_double(t.value_error_max[g]));
            row.push_back(format_double(t.bound_value[g]));
        }
        row.insert(row.end(), {format_double(t.gamma_edge), format_double(t.value_error_edge_max),
                               format_double(t.bound_value_edge)});
        for (std::size_t n = 0; n < horizon; ++n) {
            row.push_back(format_double(t.empirical_delta[n]));
            row.push_back(format_double(t.bound_compounding[n]));
        }
        csv.row(std::move(row));
    }
    return csv.str();
}

inline std::string optional_field(const std::optional<double>& v) { return v ? format_double(*v) : "undefined"; }

inline void append_correlations(CsvWriter& csv, const std::string& rewards, const StudyResult& study) {
    for (const CorrelationSummary& s : study.summaries)
        csv.row({rewards, format_double(s.gamma), optional_field(s.corr_w), optional_field(s.corr_tv),
                 optional_field(s.corr_kl), std::to_string(s.n_trials), std::to_string(s.kl_excluded)});
}

inline CsvWriter correlations_writer() {
    return CsvWriter({"rewards", "gamma", "corr_w", "corr_tv", "corr_kl", "n_trials", "kl_excluded"});
}

/// File name -> contents for every CSV run-all writes.
inline std::map<std::string, std::string> render_artifacts(const Artifacts& a, const AcceptanceConfig& cfg) {
    std::map<std::string, std::string> files;
    files["trials_index.csv"] = trials_csv(a.index_study, cfg.gammas);
    files["trials_uniform.csv"] = trials_csv(a.uniform_study, cfg.gammas);
    CsvWriter corr = correlations_writer();
    append_correlations(corr, "index", a.index_study);
    append_correlations(corr, "uniform", a.uniform_study);
    files["correlations.csv"] = corr.str();

    CsvWriter sweep({"cap", "seed", "wasserstein_loss", "final_elbo", "degenerate_rows"});
    CsvWriter trace({"cap", "seed", "iteration", "elbo"});
    for (const EmRun& r : a.em_runs) {
        sweep.row({format_double(r.cap), std::to_string(r.seed), format_double(r.loss),
                   format_double(r.fit.elbo.back()), std::to_string(r.fit.degenerate_rows)});
        for (std::size_t i = 0; i < r.fit.elbo.size(); ++i)
            trace.row({format_double(r.cap), std::to_string(r.seed), std::to_string(i), format_double(r.fit.elbo[i])});
    }
    files["em_sweep.csv"] = sweep.str();
    files["em_elbo_trace.csv"] = trace.str();
    return files;
}

/// Matplotlib script that draws the correlation scatter plots and the
/// correlation-versus-gamma curves from the CSVs next to it.
inline std::string correlation_plot_script(const std::string& trials_file, const std::string& correlations_file,
                                           double gamma) {
    std::ostringstream s;
    s << "import csv, math, os\n"
         "import matplotlib\nmatplotlib.use('Agg')\nimport matplotlib.pyplot as plt\n\n"
         "here = os.path.dirname(os.path.abspath(__file__))\n"
         "def read(name):\n"
         "    with open(os.path.join(here, name)) as f:\n"
         "        return list(csv.DictReader(f))\n\n"
      << "trials = read('" << trials_file << "')\n"
      << "value_col = 'value_error_g" << format_double(gamma) << "'\n"
      << "fig, axes = plt.subplots(1, 3, figsize=(12, 3.5))\n"
         "for ax, col, label in zip(axes, ['model_error_w', 'model_error_tv', 'model_error_kl'],\n"
         "                          ['Wasserstein', 'total variation', 'KL']):\n"
         "    pts = [(float(t[col]), float(t[value_col])) for t in trials if math.isfinite(float(t[col]))]\n"
         "    ax.scatter([p[0] for p in pts], [p[1] for p in pts], s=4)\n"
         "    ax.set_xlabel(label + ' model error')\n"
         "    ax.set_ylabel('value error')\n"
         "fig.tight_layout()\n"
         "fig.savefig(os.path.join(here, 'model_vs_value_error.png'), dpi=150)\n\n"
      << "rows = read('" << correlations_file << "')\n"
      << "fig, ax = plt.subplots(figsize=(5, 3.5))\n"
         "for rewards in sorted({r['rewards'] for r in rows}):\n"
         "    sub = [r for r in rows if r['rewards'] == rewards]\n"
         "    for col, label in [('corr_w', 'W'), ('corr_tv', 'TV'), ('corr_kl', 'KL')]:\n"
         "        pts = [(float(r['gamma']), float(r[col])) for r in sub if r[col] != 'undefined']\n"
         "        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker='o', label=f'{label} ({rewards})')\n"
         "ax.set_xlabel('gamma')\nax.set_ylabel('Pearson correlation')\nax.legend(fontsize=7)\n"
         "fig.tight_layout()\n"
         "fig.savefig(os.path.join(here, 'correlation_vs_gamma.png'), dpi=150)\n";
    return s.str();
}

// *******************************************************
// Criteria
// *******************************************************

namespace detail {

inline std::string fmt(double x) {
    std::ostringstream os;
    os.precision(4);
    os << x;
    return os.str();
}

/// Distribution with roughly `zero_fraction` of entries removed (at least one kept).
inline Distribution sparse_distribution(Index n, double zero_fraction, std::mt19937_64& rng) {
    std::exponential_distribution<double> e(1.0);
    std::bernoulli_distribution drop(zero_fraction);
    std::uniform_int_distribution<Index> keep(0, n - 1);
    Vector m(n);
    for (Index i = 0; i < n; ++i) m[i] = drop(rng) ? 0.0 : e(rng);
    if (m.sum() == 0.0) m[keep(rng)] = 1.0;
    m /= m.sum();
    return Distribution(std::move(m), kArithmeticTol);
}

inline Kernel sparse_kernel(Index n, double zero_fraction, std::mt19937_64& rng) {
    Kernel k(n, n);
    for (Index s = 0; s < n; ++s) k.row(s) = sparse_distribution(n, zero_fraction, rng).mass().transpose();
    return k;
}

}  // namespace detail

inline CriterionResult criterion_strong_duality(const AcceptanceConfig& cfg) {
    std::mt19937_64 rng(derive_seed(cfg.seed, 1));
    std::uniform_int_distribution<Index> size(2, 50);
    std::uniform_real_distribution<double> sparsity(0.0, 0.6);
    double worst = 0.0, worst_feasibility = 0.0;
    for (int i = 0; i < 500; ++i) {
        const Index n = size(rng);
        const Metric metric = random_euclidean_metric(n, 2, rng);
        const Distribution mu1 = detail::sparse_distribution(n, sparsity(rng), rng);
        const Distribution mu2 = detail::sparse_distribution(n, sparsity(rng), rng);
        const double primal = wasserstein(mu1, mu2, metric);
        const DualPotential dual = wasserstein_dual(mu1, mu2, metric);
        worst = std::max(worst, std::abs(primal - dual.objective));
        for (Index a = 0; a < n; ++a)
            for (Index b = 0; b < n; ++b)
                worst_feasibility = std::max(worst_feasibility, dual.values[a] - dual.values[b] - metric(a, b));
    }
    CriterionResult r{1, "strong duality", worst <= 1e-8 && worst_feasibility <= 1e-9, "", 0.0};
    r.detail = "max |primal - dual| = " + detail::fmt(worst) + " (tol 1e-8); max potential violation " +
               detail::fmt(worst_feasibility);
    return r;
}

inline CriterionResult criterion_line_oracle(const AcceptanceConfig& cfg) {
    std::mt19937_64 rng(derive_seed(cfg.seed, 2));
    std::uniform_int_distribution<Index> size(2, 30);
    std::uniform_real_distribution<double> coord(-5.0, 5.0), sparsity(0.0, 0.5);
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
        const Index n = size(rng);
        std::vector<double> pts(static_cast<std::size_t>(n));
        for (double& p : pts) p = coord(rng);
        std::sort(pts.begin(), pts.end());
        for (std::size_t j = 1; j < pts.size(); ++j)
            if (pts[j] <= pts[j - 1]) pts[j] = pts[j - 1] + 1e-3;  // keep the metric positive
        const Metric metric = Metric::line(pts);
        const Distribution mu1 = detail::sparse_distribution(n, sparsity(rng), rng);
        const Distribution mu2 = detail::sparse_distribution(n, sparsity(rng), rng);
        worst = std::max(worst, std::abs(wasserstein_1d(pts, mu1, mu2) - wasserstein(mu1, mu2, metric)));
    }
    return {2, "1-D closed form matches the transport LP", worst <= 1e-10,
            "max |closed form - LP| = " + detail::fmt(worst) + " (tol 1e-10)", 0.0};
}

inline CriterionResult criterion_decomposition(const AcceptanceConfig& cfg) {
    std::mt19937_64 rng(derive_seed(cfg.seed, 3));
    std::uniform_int_distribution<Index> states(1, 12), actions(1, 4);
    std::uniform_real_distribution<double> sparsity(0.0, 0.7);
    double worst = 0.0;
    int too_many_maps = 0;
    for (int i = 0; i < 200; ++i) {
        const Index n = states(rng), na = actions(rng);
        std::vector<Kernel> ks;
        for (Index a = 0; a < na; ++a) ks.push_back(detail::sparse_kernel(n, sparsity(rng), rng));
        const FiniteMetricMDP mdp(std::move(ks), Vector::Zero(n), 0.5, Metric::index_line(n));
        const CumulativeTable table = cumulative_table(mdp);
        for (Index a = 0; a < na; ++a) {
            const DeterministicModelClass one = decompose(mdp, a);
            const auto levels = static_cast<Index>(table.breakpoints[static_cast<std::size_t>(a)].size()) - 1;
            if (one.n_maps() > levels) ++too_many_maps;
        }
        worst = std::max(worst, reconstruct_and_check(mdp, decompose(mdp)));
    }
    return {3, "decomposition round trip", worst <= 1e-12 && too_many_maps == 0,
            "max deviation = " + detail::fmt(worst) + " (tol 1e-12); actions with more maps than levels: " +
                std::to_string(too_many_maps),
            0.0};
}

inline CriterionResult criterion_gridworld(const AcceptanceConfig&) {
    const Gridworld g = make_gridworld();
    const double k = model_class_lipschitz(g.model, g.metric);
    return {4, "gridworld model class constant is 2", k == 2.0, "K_F = " + format_double(k), 0.0};
}

inline CriterionResult criterion_compounding(const AcceptanceConfig& cfg) {
    std::mt19937_64 rng(derive_seed(cfg.seed, 5));
    std::uniform_int_distribution<Index> states(2, 10);
    std::uniform_real_distribution<double> mix(0.0, 1.0);
    double worst_bound = -1.0, worst_rec = -1.0;
    for (int i = 0; i < 200; ++i) {
        const Index n = states(rng);
        const Metric metric = random_euclidean_metric(n, 2, rng);
        const Kernel truth = random_kernel(n, rng);
        // Models range from near-exact to unrelated, so delta spans small and large values.
        const double eps = mix(rng);
        const Kernel model = (1.0 - eps) * truth + eps * random_kernel(n, rng);
        const CompoundingReport rep = compounding_study(truth, model, metric, random_distribution(n, rng), 6);
        worst_bound = std::max(worst_bound, rep.worst_bound_excess());
        worst_rec = std::max(worst_rec, rep.worst_recursion_excess());
    }
    return {5, "multi-step error bound and recursion", worst_bound <= 1e-9 && worst_rec <= 1e-9,
            "max(empirical - bound) = " + detail::fmt(worst_bound) + ", max(empirical - recursion) = " +
                detail::fmt(worst_rec) + " (tol 1e-9)",
            0.0};
}

inline CriterionResult criterion_linear_tightness(const AcceptanceConfig&) {
    double worst_gap = 0.0, worst_value = 0.0;
    int snapped_violations = 0, cases = 0;
    for (double k : {0.5, 1.0})
        for (double delta : {0.05, 0.2})
            for (double gamma : {0.5, 0.9}) {
                if (gamma * k >= 1.0) continue;
                ++cases;
                LinearCaseInputs in;
                in.k = k;
                in.delta = delta;
                in.gamma = gamma;
                const LinearCaseReport rep = linear_tightness_case(in);
                for (const LinearStep& s : rep.steps) {
                    worst_gap = std::max(worst_gap, std::abs(s.gap - s.formula));
                    if (std::abs(s.snapped_gap - s.formula) > s.snapped_tol) ++snapped_violations;
                }
                worst_value = std::max(worst_value, std::abs(rep.value_gap_series - rep.value_gap_formula));
            }
    return {6, "linear case attains both bounds",
            worst_gap <= 1e-12 && worst_value <= 1e-9 && snapped_violations == 0,
            std::to_string(cases) + " cases; max multi-step mismatch " + detail::fmt(worst_gap) +
                " (tol 1e-12); max value mismatch " + detail::fmt(worst_value) + " (tol 1e-9); snapped misses " +
                std::to_string(snapped_violations),
            0.0};
}

inline CriterionResult criterion_value_bound(const Artifacts& a) {
    int applicable = 0, inapplicable = 0, violations = 0;
    double worst = -std::numeric_limits<double>::infinity();
    auto check = [&](double gap, double bound) {
        if (!std::isfinite(bound)) {
            ++inapplicable;
            return;
        }
        ++applicable;
        worst = std::max(worst, gap - bound);
        if (gap > bound + 1e-6) ++violations;
    };
    for (const TrialRecord& t : a.index_study.trials) {
        for (std::size_t g = 0; g < t.bound_value.size(); ++g) check(t.value_error_max[g], t.bound_value[g]);
        check(t.value_error_edge_max, t.bound_value_edge);
    }
    return {7, "value error bound on index-reward trials", applicable > 0 && violations == 0,
            std::to_string(applicable) + " applicable (trial, gamma) pairs, " + std::to_string(inapplicable) +
                " with gamma*K >= 1; max(gap - bound) = " + detail::fmt(worst) + " (tol 1e-6)",
            0.0};
}

inline CriterionResult criterion_gvi_lipschitz(const AcceptanceConfig& cfg) {
    std::mt19937_64 rng(derive_seed(cfg.seed, 8));
    std::uniform_int_distribution<Index> states(3, 8), actions(2, 3);
    std::uniform_real_distribution<double> discount(0.1, 0.95);
    const std::vector<BackupOperator> ops{BackupOperator::max(), BackupOperator::mean(),
                                          BackupOperator::eps_greedy(0.1), BackupOperator::mellowmax(5.0)};
    double worst = -std::numeric_limits<double>::infinity();
    int violations = 0;
    for (int i = 0; i < 100; ++i) {
        FiniteMetricMDP mdp = random_metric_mdp(states(rng), actions(rng), 0.5, rng);
        const double k_w = kernel_wasserstein_lipschitz(mdp).max;
        double gamma = discount(rng);
        if (gamma * k_w >= 1.0) gamma = 0.95 / k_w;
        mdp = mdp.with_discount(gamma);
        const double k_r = function_lipschitz_uniform(mdp.reward_matrix(), mdp.metric());
        const double bound = gvi_value_lipschitz_bound(k_r, gamma, k_w);
        GviOptions opts;
        opts.tolerance = cfg.gvi_tolerance;
        for (const BackupOperator& op : ops) {
            const double k_q = empirical_q_lipschitz(gvi_run(mdp, op, opts).q, mdp.metric());
            worst = std::max(worst, k_q - bound);
            if (k_q > bound + 1e-6) ++violations;
        }
    }
    return {8, "GVI value Lipschitz bound", violations == 0,
            "400 runs; max(empirical - bound) = " + detail::fmt(worst) + " (tol 1e-6)", 0.0};
}

inline CriterionResult criterion_operators(const AcceptanceConfig& cfg) {
    std::mt19937_64 rng(derive_seed(cfg.seed, 9));
    const Index dim = 3;
    const std::vector<BackupOperator> ops{BackupOperator::max(), BackupOperator::mean(),
                                          BackupOperator::eps_greedy(0.1), BackupOperator::mellowmax(5.0),
                                          BackupOperator::boltzmann(2.0)};
    std::ostringstream detail_text;
    bool ok = true;
    for (const BackupOperator& op : ops) {
        const auto samples = random_vector_pairs(dim, 10000, 1.0, rng);
        const double ratio = operator_constant_check(op, samples);
        const double bound = operator_lipschitz_bound(op, dim, sampled_vmax(samples));
        ok = ok && ratio <= bound + 1e-9;
        detail_text << op.name() << " " << detail::fmt(ratio) << "/" << detail::fmt(bound) << "; ";
    }
    return {9, "backup operator constants", ok, "max ratio / stated constant: " + detail_text.str(), 0.0};
}

inline CriterionResult criterion_layers(const AcceptanceConfig& cfg) {
    std::mt19937_64 rng(derive_seed(cfg.seed, 10));
    std::uniform_int_distribution<Index> dims(1, 8);
    std::uniform_real_distribution<double> entry(-2.0, 2.0);
    double worst_sound = -std::numeric_limits<double>::infinity(), worst_tight = 0.0;
    for (int i = 0; i < 100; ++i) {
        Layer layer;
        layer.weight = Matrix(dims(rng), dims(rng));
        for (Index r = 0; r < layer.weight.rows(); ++r)
            for (Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = entry(rng);
        layer.bias = Vector(layer.weight.rows());
        for (Index r = 0; r < layer.bias.size(); ++r) layer.bias[r] = entry(rng);
        layer.activation = i % 2 ? Activation::relu : Activation::none;
        const LayeredNet net({layer});
        for (NormP p : {NormP::one, NormP::two, NormP::inf}) {
            const double bound = layer_lipschitz(layer, p);
            for (int k = 0; k < 100; ++k) {
                Vector x1(layer.weight.cols()), x2(layer.weight.cols());
                for (Index c = 0; c < x1.size(); ++c) {
                    x1[c] = entry(rng);
                    x2[c] = entry(rng);
                }
                const double den = vector_norm(x1 - x2, p);
                if (den == 0.0) continue;
                worst_sound = std::max(worst_sound, vector_norm(net.forward(x1) - net.forward(x2), p) / den - bound);
            }
        }
        // x1 - x2 = sign(W_j*) on the row with the largest L1 norm attains the p=inf constant.
        Index j_star = 0;
        layer.weight.rowwise().lpNorm<1>().maxCoeff(&j_star);
        const Vector x1 = layer.weight.row(j_star).transpose().unaryExpr([](double w) { return w >= 0.0 ? 1.0 : -1.0; });
        const Vector x2 = Vector::Zero(x1.size());
        const double attained = (layer.weight * (x1 - x2)).lpNorm<Eigen::Infinity>() / vector_norm(x1 - x2, NormP::inf);
        worst_tight = std::max(worst_tight, std::abs(attained - matrix_lipschitz(layer.weight, NormP::inf)));
    }
    // Whole-network soundness on a random 1-16-1 net.
    const LayeredNet mlp = LayeredNet::random_mlp({1, 16, 1}, rng);
    const double net_bound = network_lipschitz(mlp, NormP::inf);
    double net_ratio = 0.0;
    std::uniform_real_distribution<double> x(-3.0, 3.0);
    for (int k = 0; k < 10000; ++k) {
        const double a = x(rng), b = x(rng);
        if (a != b) net_ratio = std::max(net_ratio, std::abs(mlp(a) - mlp(b)) / std::abs(a - b));
    }
    const bool ok = worst_sound <= 1e-9 && worst_tight <= 1e-9 && net_ratio <= net_bound + 1e-9;
    return {10, "layer constants: soundness and p=inf tightness", ok,
            "max(quotient - bound) = " + detail::fmt(worst_sound) + "; p=inf witness gap " + detail::fmt(worst_tight) +
                "; 1-16-1 net quotient " + detail::fmt(net_ratio) + " <= " + detail::fmt(net_bound),
            0.0};
}

inline CriterionResult criterion_correlation(const Artifacts& a, double seconds) {
    auto at = [](const StudyResult& s, double gamma) -> const CorrelationSummary* {
        for (const auto& c : s.summaries)
            if (c.gamma == gamma) return &c;
        return nullptr;
    };
    const CorrelationSummary* idx = at(a.index_study, 0.95);
    const CorrelationSummary* uni = at(a.uniform_study, 0.95);
    if (!idx || !uni) return {11, "correlation study", false, "gamma 0.95 is not in the study", seconds};
    bool ok = idx->corr_w && idx->corr_tv && idx->corr_kl && *idx->corr_w > *idx->corr_tv &&
              *idx->corr_w > *idx->corr_kl;
    double spread = std::numeric_limits<double>::infinity();
    if (uni->corr_w && uni->corr_tv && uni->corr_kl) {
        const double hi = std::max({*uni->corr_w, *uni->corr_tv, *uni->corr_kl});
        const double lo = std::min({*uni->corr_w, *uni->corr_tv, *uni->corr_kl});
        spread = hi - lo;
    }
    ok = ok && spread <= 0.1 && seconds < 300.0;
    return {11, "correlation study ordering", ok,
            "index rewards: W " + optional_field(idx->corr_w) + ", TV " + optional_field(idx->corr_tv) + ", KL " +
                optional_field(idx->corr_kl) + "; uniform rewards spread " + detail::fmt(spread) + " (max 0.1)",
            seconds};
}

inline double em_gradient_check(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-2.0, 2.0), wd(0.1, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        LayeredNet net = LayeredNet::random_mlp({1, 1 + trial % 8, 1 + trial % 3, 1}, rng);
        // Zero biases put dead units exactly on the ReLU kink, where central
        // differences and the backprop subgradient legitimately disagree.
        for (Layer& l : net.layers())
            for (Index j = 0; j < l.bias.size(); ++j) l.bias[j] = u(rng) * 0.25;
        std::vector<Sample> data;
        Vector w(15);
        for (int i = 0; i < 15; ++i) {
            data.push_back({u(rng), u(rng)});
            w[i] = wd(rng);
        }
        const Vector g = weighted_squared_loss_gradient(net, data, w);
        Vector fd(g.size());
        const Vector theta = net.parameters();
        LayeredNet probe = net;
        const double h = 1e-5;
        for (Index k = 0; k < theta.size(); ++k) {
            Vector tp = theta, tm = theta;
            tp[k] += h;
            tm[k] -= h;
            probe.set_parameters(tp);
            const double lp = weighted_squared_loss(probe, data, w);
            probe.set_parameters(tm);
            const double lm = weighted_squared_loss(probe, data, w);
            fd[k] = (lp - lm) / (2.0 * h);
        }
        const double scale = std::max({g.norm(), fd.norm(), 1e-12});
        worst = std::max(worst, (g - fd).norm() / scale);
    }
    return worst;
}

inline CriterionResult criterion_em(const Artifacts& a, const AcceptanceConfig& cfg) {
    const double grad_err = em_gradient_check(derive_seed(cfg.seed, 12));
    double worst_drop = 0.0;
    for (const EmRun& r : a.em_runs)
        for (std::size_t i = 1; i < r.fit.elbo.size(); ++i)
            worst_drop = std::max(worst_drop, r.fit.elbo[i - 1] - r.fit.elbo[i]);
    std::map<double, double> mean_loss;
    for (const EmRun& r : a.em_runs) mean_loss[r.cap] += r.loss / static_cast<double>(cfg.em_seeds.size());
    const double small = mean_loss[cfg.em_small_cap];
    const double mid = mean_loss[cfg.em_mid_cap];
    const double open = mean_loss[std::numeric_limits<double>::infinity()];
    const bool ok = grad_err <= 1e-4 && worst_drop <= 1e-6 && mid <= small && mid <= open;
    return {12, "EM: gradients, ELBO monotonicity, cap U-shape", ok,
            "gradient rel. error " + detail::fmt(grad_err) + " (tol 1e-4); max ELBO drop " + detail::fmt(worst_drop) +
                " (tol 1e-6); mean loss at cap " + detail::fmt(cfg.em_small_cap) + " = " + detail::fmt(small) +
                ", cap " + detail::fmt(cfg.em_mid_cap) + " = " + detail::fmt(mid) + ", unconstrained = " +
                detail::fmt(open),
            0.0};
}

inline CriterionResult criterion_determinism(const Artifacts& first, const AcceptanceConfig& cfg) {
    const auto a = render_artifacts(first, cfg);
    const auto b = render_artifacts(build_artifacts(cfg), cfg);
    std::vector<std::string> differing;
    for (const auto& [name, text] : a) {
        const auto it = b.find(name);
        if (it == b.end() || it->second != text) differing.push_back(name);
    }
    std::string detail_text = std::to_string(a.size()) + " CSVs compared";
    for (const auto& d : differing) detail_text += "; differs: " + d;
    return {13, "rerun produces byte-identical CSVs", differing.empty() && a.size() == b.size(), detail_text, 0.0};
}

// *******************************************************
// Driver
// *******************************************************

struct AcceptanceReport {
    std::vector<CriterionResult> results;
    Artifacts artifacts;

    bool all_passed() const {
        return std::all_of(results.begin(), results.end(), [](const CriterionResult& r) { return r.passed; });
    }
};

inline std::string format_result(const CriterionResult& r) {
    std::ostringstream os;
    os << (r.passed ? "PASS" : "FAIL") << " [" << r.id << "] " << r.name << ": " << r.detail << " ("
       << detail::fmt(r.seconds) << " s)";
    return os.str();
}

/// Runs every criterion in order. `on_result` sees each result as soon as it
/// is known. A criterion that throws is recorded as a failure with the message.
inline AcceptanceReport run_acceptance(const AcceptanceConfig& cfg,
                                       const std::function<void(const CriterionResult&)>& on_result = {}) {
    cfg.validate();
    AcceptanceReport report;
    using clock = std::chrono::steady_clock;
    auto timed = [&](int id, const std::string& name, const std::function<CriterionResult()>& fn) {
        const auto t0 = clock::now();
        CriterionResult r;
        try {
            r = fn();
        } catch (const std::exception& e) {
            r = {id, name, false, std::string("threw: ") + e.what(), 0.0};
        }
        r.seconds += std::chrono::duration<double>(clock::now() - t0).count();
        if (on_result) on_result(r);
        report.results.push_back(r);
    };

    timed(1, "strong duality", [&] { return criterion_strong_duality(cfg); });
    timed(2, "1-D closed form", [&] { return criterion_line_oracle(cfg); });
    timed(3, "decomposition round trip", [&] { return criterion_decomposition(cfg); });
    timed(4, "gridworld constant", [&] { return criterion_gridworld(cfg); });
    timed(5, "multi-step bound", [&] { return criterion_compounding(cfg); });
    timed(6, "linear case", [&] { return criterion_linear_tightness(cfg); });

    bool built = false;
    double study_seconds = 0.0;
    try {
        const auto t0 = clock::now();
        report.artifacts = build_artifacts(cfg);
        study_seconds = std::chrono::duration<double>(clock::now() - t0).count();
        built = true;
    } catch (const std::exception& e) {
        for (int id : {7, 11, 12, 13}) timed(id, "experiment artifacts", [&]() -> CriterionResult {
                throw std::runtime_error(e.what());
            });
    }
    if (built) timed(7, "value bound", [&] { return criterion_value_bound(report.artifacts); });
    timed(8, "GVI Lipschitz bound", [&] { return criterion_gvi_lipschitz(cfg); });
    timed(9, "backup operators", [&] { return criterion_operators(cfg); });
    timed(10, "layer constants", [&] { return criterion_layers(cfg); });
    if (built) {
        timed(11, "correlation study", [&] { return criterion_correlation(report.artifacts, study_seconds); });
        timed(12, "EM suite", [&] { return criterion_em(report.artifacts, cfg); });
        timed(13, "determinism", [&] { return criterion_determinism(report.artifacts, cfg); });
    }
    std::sort(report.results.begin(), report.results.end(),
              [](const CriterionResult& a, const CriterionResult& b) { return a.id < b.id; });
    return report;
}

inline std::string criteria_csv(const std::vector<CriterionResult>& results) {
    CsvWriter csv({"id", "criterion", "passed", "detail"});
    for (const auto& r : results) {
        std::string detail = r.detail;
        std::replace(detail.begin(), detail.end(), ',', ';');
        csv.row({std::to_string(r.id), r.name, r.passed ? "1" : "0", "\"" + detail + "\""});
    }
    return csv.str();
}

}  // namespace lipmbrl
