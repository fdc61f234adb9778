#include "lipmbrl/decomposition.hpp"
#include "lipmbrl/experiments.hpp"
#include "lipmbrl/fixtures.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace lipmbrl;

namespace {

FiniteMetricMDP two_state() {
    Kernel k(2, 2);
    k << 0.3, 0.7, 0.6, 0.4;
    return FiniteMetricMDP({k}, Vector::Zero(2), 0.9, Metric::index_line(2));
}

}  // namespace

TEST(CumulativeTable, LeadingZeroAndMergedBreakpoints) {
    const CumulativeTable t = cumulative_table(two_state());
    ASSERT_EQ(t.values.size(), 1u);
    EXPECT_EQ(t.values[0].cols(), 3);
    EXPECT_EQ(t.values[0](0, 0), 0.0);
    EXPECT_DOUBLE_EQ(t.values[0](0, 1), 0.3);
    EXPECT_DOUBLE_EQ(t.values[0](1, 2), 1.0);
    const std::vector<double> expected{0.0, 0.3, 0.6, 1.0};
    ASSERT_EQ(t.breakpoints[0].size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(t.breakpoints[0][i], expected[i], 1e-15);
}

TEST(Decompose, DeterministicKernelGivesOneMap) {
    Kernel k = Kernel::Zero(3, 3);
    k(0, 2) = k(1, 0) = k(2, 1) = 1.0;
    const FiniteMetricMDP mdp({k}, Vector::Zero(3), 0.5, Metric::index_line(3));
    const DeterministicModelClass m = decompose(mdp, 0);
    ASSERT_EQ(m.n_maps(), 1);
    EXPECT_EQ(m.maps()[0], (StateMap{2, 0, 1}));
    EXPECT_DOUBLE_EQ(m.weights()(0, 0), 1.0);
}

TEST(Decompose, TwoStateExampleHasThreeMaps) {
    const DeterministicModelClass m = decompose(two_state(), 0);
    ASSERT_EQ(m.n_maps(), 3);
    EXPECT_EQ(m.maps()[0], (StateMap{0, 0}));
    EXPECT_EQ(m.maps()[1], (StateMap{1, 0}));
    EXPECT_EQ(m.maps()[2], (StateMap{1, 1}));
    EXPECT_NEAR(m.weights()(0, 0), 0.3, 1e-15);
    EXPECT_NEAR(m.weights()(0, 1), 0.3, 1e-15);
    EXPECT_NEAR(m.weights()(0, 2), 0.4, 1e-15);
    EXPECT_LE(reconstruct_and_check(two_state(), m), 1e-15);
}

TEST(Decompose, GridworldUpActionReconstructs) {
    const Gridworld g = make_gridworld();
    const DeterministicModelClass m = decompose(g.mdp, Gridworld::up);
    EXPECT_LE(m.n_maps(), 2 * g.mdp.n_states());
    const FiniteMetricMDP only_up({g.mdp.kernel(Gridworld::up)}, g.mdp.rewards(), 0.9, g.metric);
    EXPECT_LE(reconstruct_and_check(only_up, m), 1e-12);
}

TEST(Decompose, AllActionsShareMaps) {
    const Gridworld g = make_gridworld();
    const DeterministicModelClass m = decompose(g.mdp);
    EXPECT_EQ(m.n_actions(), 4);
    EXPECT_LE(reconstruct_and_check(g.mdp, m), 1e-12);
}

TEST(Decompose, InvalidMdpIsRejected) {
    Kernel k(2, 2);
    k << 0.3, 0.6, 0.6, 0.4;
    const FiniteMetricMDP bad({k}, Vector::Zero(2), 0.9, Metric::index_line(2));
    EXPECT_THROW(decompose(bad, 0), std::invalid_argument);
}

TEST(ReconstructAndCheck, DetectsPerturbedWeights) {
    const DeterministicModelClass m = decompose(two_state(), 0);
    Matrix w = m.weights();
    w(0, 0) += 0.01;
    w(0, 2) -= 0.01;
    const DeterministicModelClass moved(2, m.maps(), w);
    EXPECT_GE(reconstruct_and_check(two_state(), moved), 0.009);
}

TEST(DecomposeProperty, RandomKernelsReconstruct) {
    std::mt19937_64 rng(303);
    for (int trial = 0; trial < 200; ++trial) {
        const Index n = 2 + trial % 11;
        const FiniteMetricMDP mdp = random_metric_mdp(n, 1 + trial % 4, 0.9, rng);
        const DeterministicModelClass m = decompose(mdp);
        EXPECT_LE(reconstruct_and_check(mdp, m), 1e-12);
        for (Index a = 0; a < mdp.n_actions(); ++a) {
            const DeterministicModelClass one = decompose(mdp, a);
            // At most one map per distinct cumulative level.
            EXPECT_LE(one.n_maps(), n * n + 1);
            EXPECT_NEAR(one.weights().sum(), 1.0, 1e-12);
            EXPECT_GE(one.weights().minCoeff(), 0.0);
        }
    }
}

TEST(ModelClassLipschitz, IdentityAndConstantMaps) {
    const Metric d = Metric::index_line(4);
    EXPECT_EQ(model_class_lipschitz(DeterministicModelClass(4, {{0, 1, 2, 3}}, Matrix::Ones(1, 1)), d), 1.0);
    EXPECT_EQ(model_class_lipschitz(DeterministicModelClass(4, {{2, 2, 2, 2}}, Matrix::Ones(1, 1)), d), 0.0);
}

TEST(ModelClassLipschitz, GridworldIsTwo) {
    // A blocked move keeps one neighbor in place while the other advances.
    const Gridworld g = make_gridworld();
    EXPECT_DOUBLE_EQ(model_class_lipschitz(g.model, g.metric), 2.0);
}

TEST(ModelClassLipschitz, InvariantUnderMetricScaling) {
    const Gridworld g = make_gridworld();
    EXPECT_DOUBLE_EQ(model_class_lipschitz(g.model, g.metric.scaled(3.5)), model_class_lipschitz(g.model, g.metric));
}
