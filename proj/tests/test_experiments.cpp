#include "lipmbrl/experiments.hpp"
#include "lipmbrl/fixtures.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <random>

using namespace lipmbrl;

TEST(Seeds, DeriveSeedIsStableAndSpreads) {
    EXPECT_EQ(derive_seed(1, 0), derive_seed(1, 0));
    EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
    EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
}

TEST(ParallelFor, VisitsEveryIndexOnceAndRethrows) {
    std::vector<std::atomic<int>> hits(97);
    parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
    EXPECT_THROW(parallel_for(10, 3,
                              [](std::size_t i) {
                                  if (i == 7) throw std::runtime_error("boom");
                              }),
                 std::runtime_error);
}

TEST(RandomMrp, DeterministicAndValid) {
    const FiniteMetricMDP a = random_mrp(10, RewardMode::uniform_0_10, 0.9, 42);
    const FiniteMetricMDP b = random_mrp(10, RewardMode::uniform_0_10, 0.9, 42);
    EXPECT_EQ(a.kernel(0), b.kernel(0));
    EXPECT_EQ(a.rewards(), b.rewards());
    EXPECT_TRUE(validate(a).empty());
    EXPECT_GE(a.rewards().minCoeff(), 0.0);
    EXPECT_LE(a.rewards().maxCoeff(), 10.0);
}

TEST(RandomMrp, IndexRewardsAreOneLipschitz) {
    const FiniteMetricMDP m = random_mrp(10, RewardMode::index, 0.9, 3);
    EXPECT_DOUBLE_EQ(function_lipschitz(m.rewards(), m.metric()), 1.0);
}

TEST(Pearson, DegenerateAndPerfect) {
    EXPECT_FALSE(pearson({1.0, 1.0, 1.0}, {1.0, 2.0, 3.0}).has_value());
    EXPECT_FALSE(pearson({1.0}, {2.0}).has_value());
    EXPECT_NEAR(*pearson({1.0, 2.0, 3.0}, {2.0, 4.0, 6.0}), 1.0, 1e-15);
    EXPECT_NEAR(*pearson({1.0, 2.0, 3.0}, {3.0, 2.0, 1.0}), -1.0, 1e-15);
    EXPECT_THROW(pearson({1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST(Summarize, ZeroModelErrorGivesUndefinedCorrelations) {
    std::vector<TrialRecord> trials(40);
    for (std::size_t i = 0; i < trials.size(); ++i) {
        trials[i].value_error = {0.0};
        trials[i].model_error_kl = i % 2 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    const auto s = summarize(trials, {0.9});
    ASSERT_EQ(s.size(), 1u);
    EXPECT_FALSE(s[0].corr_w.has_value());
    EXPECT_FALSE(s[0].corr_tv.has_value());
    EXPECT_FALSE(s[0].corr_kl.has_value());
    EXPECT_EQ(s[0].kl_excluded, 20);
}

TEST(CorrelationStudy, ThreadCountDoesNotChangeResults) {
    StudyConfig cfg;
    cfg.n_trials = 40;
    cfg.gammas = {0.9};
    const StudyResult one = metric_correlation_study(cfg);
    cfg.threads = 3;
    const StudyResult three = metric_correlation_study(cfg);
    for (std::size_t i = 0; i < one.trials.size(); ++i) {
        EXPECT_EQ(one.trials[i].model_error_w, three.trials[i].model_error_w);
        EXPECT_EQ(one.trials[i].value_error, three.trials[i].value_error);
    }
    EXPECT_EQ(one.summaries[0].corr_w, three.summaries[0].corr_w);
}

TEST(CorrelationStudy, BoundsHoldOnEveryTrial) {
    StudyConfig cfg;
    cfg.n_trials = 60;
    const StudyResult res = metric_correlation_study(cfg);
    for (const TrialRecord& t : res.trials) {
        for (std::size_t g = 0; g < t.bound_value.size(); ++g) EXPECT_LE(t.value_error_max[g], t.bound_value[g] + 1e-6);
        EXPECT_LE(t.value_error_edge_max, t.bound_value_edge + 1e-6);
        for (std::size_t n = 0; n < t.empirical_delta.size(); ++n)
            EXPECT_LE(t.empirical_delta[n], t.bound_compounding[n] + 1e-9);
    }
}

TEST(CorrelationStudy, RejectsTooFewTrials) {
    StudyConfig cfg;
    cfg.n_trials = 29;
    EXPECT_THROW(metric_correlation_study(cfg), std::invalid_argument);
}

TEST(CompoundingStudy, IdenticalModelHasZeroError) {
    std::mt19937_64 rng(801);
    const Kernel k = random_kernel(6, rng);
    const Metric d = random_euclidean_metric(6, 2, rng);
    const CompoundingReport r = compounding_study(k, k, d, Distribution::uniform(6), 5);
    EXPECT_EQ(r.delta, 0.0);
    for (const auto& s : r.steps) EXPECT_NEAR(s.empirical, 0.0, 1e-12);
}

TEST(CompoundingStudy, FirstStepIsWithinDelta) {
    std::mt19937_64 rng(802);
    for (int t = 0; t < 20; ++t) {
        const Kernel a = random_kernel(5, rng), b = random_kernel(5, rng);
        const Metric d = random_euclidean_metric(5, 2, rng);
        const CompoundingReport r = compounding_study(a, b, d, random_distribution(5, rng), 1);
        EXPECT_LE(r.steps[0].empirical, r.delta + 1e-12);
    }
}

TEST(CompoundingStudyProperty, BoundAndRecursionHold) {
    std::mt19937_64 rng(803);
    std::uniform_real_distribution<double> eps(0.0, 0.3);
    for (int t = 0; t < 200; ++t) {
        const Index n = 3 + t % 8;
        const Kernel truth = random_kernel(n, rng), noise = random_kernel(n, rng);
        const double e = eps(rng);
        const Kernel model = (1 - e) * truth + e * noise;
        const Metric d = random_euclidean_metric(n, 2, rng);
        const CompoundingReport r = compounding_study(truth, model, d, random_distribution(n, rng), 8);
        EXPECT_LE(r.worst_bound_excess(), 1e-9);
        EXPECT_LE(r.worst_recursion_excess(), 1e-9);
    }
}

TEST(LinearCase, HandValues) {
    LinearCaseInputs in;
    in.k = 1.0;
    in.delta = 0.1;
    in.gamma = 0.5;
    in.horizon = 3;
    const LinearCaseReport r = linear_tightness_case(in);
    EXPECT_NEAR(r.steps[2].gap, 0.3, 1e-15);
    EXPECT_NEAR(r.steps[2].formula, 0.3, 1e-15);

    in.delta = 0.0;
    for (const auto& s : linear_tightness_case(in).steps) EXPECT_EQ(s.gap, 0.0);

    const LinearCaseReport half = linear_tightness_case(LinearCaseInputs{});
    // 0.9 * 0.1 / (0.1 * 0.55)
    EXPECT_NEAR(half.value_gap_formula, 1.6363636363636365, 1e-12);
    EXPECT_NEAR(half.value_gap_series, half.value_gap_formula, 1e-9);
}

TEST(LinearCase, GapEqualsFormulaOnTheGrid) {
    for (double k : {0.5, 1.0})
        for (double delta : {0.05, 0.2})
            for (double gamma : {0.5, 0.9}) {
                if (gamma * k >= 1.0) continue;
                const LinearCaseReport r = linear_tightness_case({k, delta, gamma, 1.0, 6, 1e-3, 4.0});
                for (const auto& s : r.steps) {
                    EXPECT_NEAR(s.gap, s.formula, 1e-12);
                    EXPECT_NEAR(s.snapped_gap, s.formula, s.snapped_tol + 1e-12);
                }
                EXPECT_NEAR(r.value_gap_series, r.value_gap_formula, 1e-9);
            }
}

TEST(LinearCase, InapplicableDiscount) {
    LinearCaseInputs in;
    in.k = 1.5;
    in.gamma = 0.9;
    EXPECT_THROW(linear_tightness_case(in), BoundInapplicable);
}
