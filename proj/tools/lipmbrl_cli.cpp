// Command-line front end. Exit codes: 0 success, 1 a checked property failed,
// 2 usage, configuration or I/O error.

#include "CLI11.hpp"
#include "lipmbrl/acceptance.hpp"
#include "lipmbrl/lipmbrl.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace lipmbrl;

namespace {

constexpr int kOk = 0;
constexpr int kPropertyFailed = 1;
constexpr int kUsageError = 2;

struct Globals {
    std::string out;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

std::string default_out_dir() {
    const char* env = std::getenv("LIPMBRL_OUT_DIR");
    return env && *env ? env : "lipmbrl_out";
}

/// --mdp FILE wins over --fixture NAME.
struct MdpSource {
    std::string file;
    std::string fixture = "gridworld";
    std::optional<double> discount;

    void add(CLI::App* cmd) {
        cmd->add_option("--mdp", file, "MDP JSON file (overrides --fixture)");
        cmd->add_option("--fixture", fixture, "Built-in MDP")->check(CLI::IsMember({"gridworld", "chain"}));
        cmd->add_option("--discount", discount, "Override the discount");
    }

    FiniteMetricMDP load() const {
        FiniteMetricMDP mdp = !file.empty()            ? load_mdp(file)
                              : fixture == "gridworld" ? make_gridworld().mdp
                                                       : make_chain();
        if (discount) mdp = mdp.with_discount(*discount);
        return mdp;
    }
};

Distribution json_distribution(const nlohmann::json& j, const std::string& what) {
    const auto v = j.at(what).get<std::vector<double>>();
    return Distribution(Vector::Map(v.data(), static_cast<Index>(v.size())), kArithmeticTol);
}

/// {"metric": [[...]], "mu1": [...], "mu2": [...]} or {"support": [...], ...} for points on a line.
struct DistributionPair {
    Metric metric;
    Distribution mu1, mu2;
};

DistributionPair load_pair(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open distribution pair file '" + path.string() + "'");
    try {
        nlohmann::json j;
        in >> j;
        DistributionPair p;
        if (j.contains("support")) {
            const auto pts = j.at("support").get<std::vector<double>>();
            p.metric = Metric::line(pts);
        } else {
            p.metric = Metric::checked(detail::json_matrix(j.at("metric"), "metric"));
        }
        p.mu1 = json_distribution(j, "mu1");
        p.mu2 = json_distribution(j, "mu2");
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + path.string() + "': " + e.what());
    } catch (const std::invalid_argument& e) {
        throw IoError("'" + path.string() + "': " + e.what());
    }
}

void save(const Globals& g, const std::string& name, const std::string& text) {
    const fs::path path = fs::path(g.out) / name;
    write_text(path, text);
    std::cout << "wrote " << path.string() << '\n';
}

// *******************************************************
// Subcommands
// *******************************************************

struct MetricCompare {
    double c1 = 2.0, c2 = 0.5;
    std::string pair_file;

    int run(const Globals& g) const {
        CsvWriter csv({"case", "wasserstein", "wasserstein_dual", "total_variation", "kl"});
        auto add = [&](const std::string& name, const Distribution& a, const Distribution& b, const Metric& d) {
            const double w = wasserstein(a, b, d), wd = wasserstein_dual(a, b, d).objective;
            const double tv = total_variation(a, b), kl = kl_divergence(a, b);
            csv.row({name, format_double(w), format_double(wd), format_double(tv), format_double(kl)});
            std::cout << name << ": W=" << format_double(w) << " TV=" << format_double(tv)
                      << " KL=" << format_double(kl) << '\n';
        };
        const ShiftedPair p = make_shifted_constants(c1, c2);
        add("shifted_constants", p.mu1, p.mu2, p.metric);
        add("identical", p.mu1, p.mu1, p.metric);
        if (!pair_file.empty()) {
            const DistributionPair q = load_pair(pair_file);
            add("pair_file", q.mu1, q.mu2, q.metric);
        }
        save(g, "metric_compare.csv", csv.str());
        return kOk;
    }
};

struct Decompose {
    MdpSource source;

    int run(const Globals& g) const {
        const FiniteMetricMDP mdp = source.load();
        const DeterministicModelClass model = decompose(mdp);
        std::vector<std::string> header{"map"};
        for (Index s = 0; s < mdp.n_states(); ++s) header.push_back("s" + std::to_string(s));
        for (Index a = 0; a < mdp.n_actions(); ++a) header.push_back("g_a" + std::to_string(a));
        CsvWriter csv(header);
        for (Index i = 0; i < model.n_maps(); ++i) {
            std::vector<std::string> row{std::to_string(i)};
            for (Index t : model.maps()[static_cast<std::size_t>(i)]) row.push_back(std::to_string(t));
            for (Index a = 0; a < mdp.n_actions(); ++a) row.push_back(format_double(model.weights()(a, i)));
            csv.row(row);
        }
        save(g, "decomposition.csv", csv.str());
        const double dev = reconstruct_and_check(mdp, model);
        std::cout << model.n_maps() << " maps; reconstruction deviation " << format_double(dev) << "; K_F "
                  << format_double(model_class_lipschitz(model, mdp.metric())) << '\n';
        return dev <= 1e-12 ? kOk : kPropertyFailed;
    }
};

struct Gvi {
    MdpSource source;
    std::string op = "max";
    double param = 0.0;
    double tolerance = 1e-10;
    long max_iters = 100000;
    std::string order = "jacobi";

    int run(const Globals& g) const {
        const FiniteMetricMDP mdp = source.load();
        GviOptions opts;
        opts.tolerance = tolerance;
        opts.max_iters = max_iters;
        opts.order = order == "gauss-seidel" ? SweepOrder::gauss_seidel : SweepOrder::jacobi;
        const GviResult res = gvi_run(mdp, BackupOperator::parse(op, param), opts);

        std::vector<std::string> header{"state"};
        for (Index a = 0; a < mdp.n_actions(); ++a) header.push_back("q_a" + std::to_string(a));
        CsvWriter csv(header);
        for (Index s = 0; s < mdp.n_states(); ++s) {
            std::vector<std::string> row{std::to_string(s)};
            for (Index a = 0; a < mdp.n_actions(); ++a) row.push_back(format_double(res.q.values(s, a)));
            csv.row(row);
        }
        save(g, "gvi_q.csv", csv.str());

        const double k_q = empirical_q_lipschitz(res.q, mdp.metric());
        const double k_w = kernel_wasserstein_lipschitz(mdp).max;
        const double k_r = function_lipschitz_uniform(mdp.reward_matrix(), mdp.metric());
        std::cout << "converged in " << res.iterations << " sweeps; empirical Q constant " << format_double(k_q)
                  << "; K_W " << format_double(k_w) << "; K_R " << format_double(k_r) << '\n';
        if (!BackupOperator::parse(op, param).is_non_expansion() || mdp.discount() * k_w >= 1.0) {
            std::cout << "value Lipschitz bound not applicable\n";
            return kOk;
        }
        const double bound = gvi_value_lipschitz_bound(k_r, mdp.discount(), k_w);
        std::cout << "bound " << format_double(bound) << '\n';
        return k_q <= bound + 1e-6 ? kOk : kPropertyFailed;
    }
};

struct LayerConstants {
    std::vector<Index> widths{1, 16, 16, 1};
    std::string norm = "inf";
    int pairs = 10000;

    int run(const Globals& g) const {
        const NormP p = parse_norm(norm);
        std::mt19937_64 rng(g.seed);
        const LayeredNet net = LayeredNet::random_mlp(widths, rng);
        CsvWriter csv({"layer", "rows", "cols", "constant"});
        for (std::size_t l = 0; l < net.layers().size(); ++l) {
            const Layer& layer = net.layers()[l];
            csv.row({std::to_string(l), std::to_string(layer.weight.rows()), std::to_string(layer.weight.cols()),
                     format_double(layer_lipschitz(layer, p))});
        }
        const double bound = network_lipschitz(net, p);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        double worst = 0.0;
        for (int i = 0; i < pairs; ++i) {
            Vector x(widths.front()), y(widths.front());
            for (Index j = 0; j < x.size(); ++j) x[j] = u(rng), y[j] = u(rng);
            const double den = vector_norm(x - y, p);
            if (den > 0.0) worst = std::max(worst, vector_norm(net.forward(x) - net.forward(y), p) / den);
        }
        save(g, "layer_lipschitz.csv", csv.str());
        std::cout << "network bound (" << norm_name(p) << ") " << format_double(bound) << "; max sampled quotient "
                  << format_double(worst) << '\n';
        return worst <= bound * (1.0 + 1e-12) ? kOk : kPropertyFailed;
    }
};

struct OperatorCheck {
    std::vector<std::string> ops{"max", "mean", "eps_greedy", "mellowmax", "boltzmann"};
    double eps = 0.1;
    double beta = 2.0;
    Index dim = 3;
    int pairs = 10000;
    double magnitude = 1.0;

    int run(const Globals& g) const {
        std::mt19937_64 rng(g.seed);
        const auto samples = random_vector_pairs(dim, static_cast<std::size_t>(pairs), magnitude, rng);
        CsvWriter csv({"operator", "param", "observed", "bound"});
        bool ok = true;
        for (const std::string& name : ops) {
            const BackupOperator op = BackupOperator::parse(name, name == "eps_greedy" ? eps : beta);
            const double seen = operator_constant_check(op, samples);
            const double bound = operator_lipschitz_bound(op, dim, sampled_vmax(samples));
            ok = ok && seen <= bound + 1e-9;
            csv.row({op.name(), format_double(op.param), format_double(seen), format_double(bound)});
            std::cout << op.name() << ": observed " << format_double(seen) << " <= " << format_double(bound) << '\n';
        }
        save(g, "operator_check.csv", csv.str());
        return ok ? kOk : kPropertyFailed;
    }
};

struct Compounding {
    Index states = 10;
    int horizon = 6;
    double epsilon = 0.1;
    int trials = 20;

    int run(const Globals& g) const {
        if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0,1]");
        CsvWriter csv({"trial", "n", "empirical", "bound", "recursion", "delta", "k_bar"});
        double worst = -std::numeric_limits<double>::infinity();
        for (int t = 0; t < trials; ++t) {
            std::mt19937_64 rng(derive_seed(g.seed, static_cast<std::uint64_t>(t)));
            const Metric d = random_euclidean_metric(states, 2, rng);
            const Kernel truth = random_kernel(states, rng);
            const Kernel model = (1.0 - epsilon) * truth + epsilon * random_kernel(states, rng);
            const CompoundingReport r = compounding_study(truth, model, d, random_distribution(states, rng), horizon);
            for (const auto& s : r.steps)
                csv.row({std::to_string(t), std::to_string(s.n), format_double(s.empirical), format_double(s.bound),
                         format_double(s.recursion), format_double(r.delta), format_double(r.k_bar)});
            worst = std::max({worst, r.worst_bound_excess(), r.worst_recursion_excess()});
        }
        save(g, "compounding.csv", csv.str());
        std::cout << "max(empirical - bound) over " << trials << " trials: " << format_double(worst) << '\n';
        return worst <= 1e-9 ? kOk : kPropertyFailed;
    }
};

struct ValueBound {
    BoundInputs in{0.1, 0.5, 1.0, 0.9, 1};

    int run(const Globals& g) const {
        in.validate();
        CsvWriter csv({"delta", "k_bar", "k_r", "gamma", "horizon", "compounding_bound", "value_bound"});
        std::string value = "inapplicable";
        try {
            value = format_double(value_bound(in));
        } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kPropertyFailed;
    } catch (const BoundInapplicable& e) {
            std::cout << e.what() << '\n';
        }
        const std::string comp = format_double(compounding_bound(in));
        csv.row({format_double(in.delta), format_double(in.k_bar), format_double(in.k_r), format_double(in.gamma),
                 std::to_string(in.horizon), comp, value});
        save(g, "value_bound.csv", csv.str());
        std::cout << "compounding bound " << comp << "; value bound " << value << '\n';
        return kOk;
    }
};

struct Correlation {
    StudyConfig cfg;
    std::string rewards = "index";
    std::string model_agg = "mean";
    std::string value_agg = "mean";
    double plot_gamma = 0.95;

    int run(const Globals& g) {
        cfg.seed = g.seed;
        cfg.threads = g.threads;
        cfg.rewards = parse_reward_mode(rewards);
        cfg.model_aggregation = model_agg == "max" ? Aggregation::max : Aggregation::mean;
        cfg.value_aggregation = value_agg == "max" ? Aggregation::max : Aggregation::mean;
        const StudyResult res = metric_correlation_study(cfg);
        const std::string trials_file = std::string("trials_") + reward_mode_name(cfg.rewards) + ".csv";
        save(g, trials_file, trials_csv(res, cfg.gammas));
        CsvWriter corr = correlations_writer();
        append_correlations(corr, reward_mode_name(cfg.rewards), res);
        save(g, "correlations.csv", corr.str());
        save(g, "plot_correlation.py", correlation_plot_script(trials_file, "correlations.csv", plot_gamma));
        for (const auto& s : res.summaries)
            std::cout << "gamma " << format_double(s.gamma) << ": W " << optional_field(s.corr_w) << ", TV "
                      << optional_field(s.corr_tv) << ", KL " << optional_field(s.corr_kl) << " (" << s.kl_excluded
                      << " infinite KL excluded)\n";
        return kOk;
    }
};

struct EmTrain {
    EmOptions opts;
    std::optional<double> cap;
    std::string norm = "inf";
    bool clip = false;
    std::uint64_t data_seed = 7;
    int per_function = 30;
    int test_points = 41;

    int run(const Globals& g) {
        opts.seed = g.seed;
        opts.m_step.norm = parse_norm(norm);
        opts.m_step.mode = clip ? ConstraintMode::clip : ConstraintMode::project;
        if (cap) opts.m_step.cap = *cap;
        const auto truth = five_function_truth();
        std::mt19937_64 rng(data_seed);
        const auto data = sample_functions(truth, per_function, -2.0, 2.0, rng);
        const EmFitResult fit = em_fit(data, opts);
        const double loss = mixture_wasserstein_loss(fit.model, truth, linspace(-2.0, 2.0, test_points));

        CsvWriter trace({"iteration", "elbo"});
        double worst_drop = 0.0;
        for (std::size_t i = 0; i < fit.elbo.size(); ++i) {
            trace.row({std::to_string(i), format_double(fit.elbo[i])});
            if (i > 0) worst_drop = std::max(worst_drop, fit.elbo[i - 1] - fit.elbo[i]);
        }
        save(g, "em_elbo.csv", trace.str());
        CsvWriter mix({"component", "mixing"});
        for (Index j = 0; j < fit.model.size(); ++j) mix.row({std::to_string(j), format_double(fit.model.mixing[j])});
        save(g, "em_mixing.csv", mix.str());
        std::cout << "final ELBO " << format_double(fit.elbo.back()) << "; Wasserstein loss " << format_double(loss)
                  << "; largest ELBO drop " << format_double(worst_drop) << '\n';
        return worst_drop <= 1e-6 ? kOk : kPropertyFailed;
    }
};

struct RunAll {
    AcceptanceConfig cfg;

    int run(const Globals& g) {
        cfg.seed = g.seed;
        cfg.threads = g.threads;
        const AcceptanceReport report =
            run_acceptance(cfg, [](const CriterionResult& r) { std::cout << format_result(r) << std::endl; });
        if (!report.artifacts.index_study.trials.empty())
            for (const auto& [name, text] : render_artifacts(report.artifacts, cfg)) save(g, name, text);
        save(g, "criteria.csv", criteria_csv(report.results));
        save(g, "plot_correlation.py", correlation_plot_script("trials_index.csv", "correlations.csv", 0.95));
        const auto failed = std::count_if(report.results.begin(), report.results.end(),
                                          [](const CriterionResult& r) { return !r.passed; });
        std::cout << report.results.size() - static_cast<std::size_t>(failed) << "/" << report.results.size()
                  << " criteria passed\n";
        return failed == 0 ? kOk : kPropertyFailed;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lipschitz model-based RL toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from a TOML/INI file; command-line flags win");
    Globals g;
    g.out = default_out_dir();
    app.add_option("--out", g.out, "Output directory (default $LIPMBRL_OUT_DIR or ./lipmbrl_out)");
    app.add_option("--seed", g.seed, "Master seed");
    app.add_option("--threads", g.threads, "Worker threads for experiments")->check(CLI::Range(1u, 256u));

    std::function<int()> action;

    MetricCompare mc;
    auto* c = app.add_subcommand("metric-compare", "Wasserstein, TV and KL on the shifted-constants pair");
    c->add_option("--c1", mc.c1, "First constant");
    c->add_option("--c2", mc.c2, "Second constant");
    c->add_option("--pair", mc.pair_file, "JSON file with metric or support, mu1 and mu2");
    c->callback([&] { action = [&] { return mc.run(g); }; });

    Decompose dec;
    c = app.add_subcommand("decompose", "Deterministic-map decomposition of an MDP");
    dec.source.add(c);
    c->callback([&] { action = [&] { return dec.run(g); }; });

    Gvi gvi;
    c = app.add_subcommand("gvi", "Generalized value iteration");
    gvi.source.add(c);
    c->add_option("--operator", gvi.op, "max, mean, eps_greedy, mellowmax or boltzmann");
    c->add_option("--param", gvi.param, "Epsilon or beta");
    c->add_option("--tolerance", gvi.tolerance, "Stop when the max-abs change is below this");
    c->add_option("--max-iters", gvi.max_iters, "Sweep limit");
    c->add_option("--order", gvi.order, "Sweep order")->check(CLI::IsMember({"jacobi", "gauss-seidel"}));
    c->callback([&] { action = [&] { return gvi.run(g); }; });

    LayerConstants lc;
    c = app.add_subcommand("layer-lipschitz", "Layer constants of a random ReLU net against sampled quotients");
    c->add_option("--widths", lc.widths, "Layer widths, input first");
    c->add_option("--norm", lc.norm, "1, 2 or inf");
    c->add_option("--pairs", lc.pairs, "Sampled input pairs");
    c->callback([&] { action = [&] { return lc.run(g); }; });

    OperatorCheck oc;
    c = app.add_subcommand("operator-check", "Sampled Lipschitz quotients of backup operators");
    c->add_option("--operators", oc.ops, "Operators to check");
    c->add_option("--epsilon", oc.eps, "eps_greedy parameter");
    c->add_option("--beta", oc.beta, "mellowmax and boltzmann parameter");
    c->add_option("--dim", oc.dim, "Number of actions")->check(CLI::PositiveNumber);
    c->add_option("--pairs", oc.pairs, "Sampled vector pairs");
    c->add_option("--magnitude", oc.magnitude, "Entries are uniform in [-m, m]");
    c->callback([&] { action = [&] { return oc.run(g); }; });

    Compounding comp;
    c = app.add_subcommand("compounding", "Multi-step Wasserstein error against its bound");
    c->add_option("--states", comp.states, "States per instance")->check(CLI::Range(2, 100000));
    c->add_option("--horizon", comp.horizon, "Steps")->check(CLI::PositiveNumber);
    c->add_option("--epsilon", comp.epsilon, "Model = (1 - eps) truth + eps noise");
    c->add_option("--trials", comp.trials, "Random instances")->check(CLI::PositiveNumber);
    c->callback([&] { action = [&] { return comp.run(g); }; });

    ValueBound vb;
    c = app.add_subcommand("value-bound", "Evaluate the multi-step and value error bounds");
    c->add_option("--delta", vb.in.delta, "One-step model error");
    c->add_option("--k-bar", vb.in.k_bar, "Lipschitz constant of the dynamics");
    c->add_option("--k-r", vb.in.k_r, "Reward Lipschitz constant");
    c->add_option("--gamma", vb.in.gamma, "Discount");
    c->add_option("--horizon", vb.in.horizon, "Steps for the multi-step bound");
    c->callback([&] { action = [&] { return vb.run(g); }; });

    Correlation corr;
    c = app.add_subcommand("correlation", "Model-error versus value-error correlation study");
    c->add_option("--trials", corr.cfg.n_trials, "Random MRPs");
    c->add_option("--states", corr.cfg.n_states, "States per MRP");
    c->add_option("--gammas", corr.cfg.gammas, "Discounts");
    c->add_option("--rewards", corr.rewards, "Reward mode")->check(CLI::IsMember({"index", "uniform"}));
    c->add_option("--model-aggregation", corr.model_agg, "mean or max over states")
        ->check(CLI::IsMember({"mean", "max"}));
    c->add_option("--value-aggregation", corr.value_agg, "mean or max over states")
        ->check(CLI::IsMember({"mean", "max"}));
    c->add_option("--plot-gamma", corr.plot_gamma, "Discount for the scatter plot");
    c->callback([&] { action = [&] { return corr.run(g); }; });

    EmTrain em;
    c = app.add_subcommand("em-train", "EM on the five-function regression domain");
    c->add_option("--cap", em.cap, "Per-layer Lipschitz cap (unconstrained when omitted)");
    c->add_option("--norm", em.norm, "1, 2 or inf");
    c->add_flag("--clip", em.clip, "Clip weight entries instead of rescaling");
    c->add_option("--components", em.opts.n_components, "Mixture components");
    c->add_option("--hidden", em.opts.hidden, "Hidden width");
    c->add_option("--sigma", em.opts.sigma, "Gaussian noise scale");
    c->add_option("--iters", em.opts.em_iters, "EM iterations");
    c->add_option("--steps", em.opts.m_step.steps, "Gradient steps per M-step");
    c->add_option("--learn-rate", em.opts.m_step.learn_rate, "Initial gradient step size");
    c->add_option("--data-seed", em.data_seed, "Seed for the training samples");
    c->add_option("--per-function", em.per_function, "Samples per truth function");
    c->add_option("--test-points", em.test_points, "Grid size for the Wasserstein loss");
    c->callback([&] { action = [&] { return em.run(g); }; });

    RunAll all;
    c = app.add_subcommand("run-all", "Run every acceptance criterion and write all artifacts");
    c->add_option("--trials", all.cfg.correlation_trials, "Trials per correlation study");
    c->add_option("--states", all.cfg.correlation_states, "States per correlation MRP");
    c->add_option("--tolerance", all.cfg.gvi_tolerance, "GVI stopping tolerance");
    c->add_option("--em-iters", all.cfg.em.em_iters, "EM iterations per run");
    c->add_option("--em-seeds", all.cfg.em_seeds, "EM initialization seeds");
    c->callback([&] { action = [&] { return all.run(g); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsageError;
    }

    try {
        ensure_writable_dir(g.out);
        write_text(fs::path(g.out) / "config_used.toml", app.config_to_str(true, false));
        return action();
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kPropertyFailed;
    } catch (const BoundInapplicable& e) {
        std::cerr << "error: " << e.what() << '\n';
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid configuration: " << e.what() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
    }
    return kUsageError;
}
