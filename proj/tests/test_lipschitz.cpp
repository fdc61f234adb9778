#include "lipmbrl/decomposition.hpp"
#include "lipmbrl/experiments.hpp"
#include "lipmbrl/fixtures.hpp"
#include "lipmbrl/lipschitz.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace lipmbrl;

namespace {

Layer linear_layer(const Matrix& w, Activation act = Activation::none) {
    return Layer{w, Vector::Zero(w.rows()), act};
}

Matrix two_by_two() {
    Matrix w(2, 2);
    w << 1, 2, 3, 4;
    return w;
}

}  // namespace

TEST(FunctionLipschitz, ConstantAndIndexValues) {
    const Metric d = Metric::index_line(5);
    EXPECT_EQ(function_lipschitz(Vector::Constant(5, 3.0), d), 0.0);
    EXPECT_DOUBLE_EQ(function_lipschitz(Vector::LinSpaced(5, 0.0, 8.0), d), 2.0);
}

TEST(KernelLipschitz, IdentityAndConstantKernels) {
    const Metric d = Metric::index_line(4);
    EXPECT_DOUBLE_EQ(kernel_wasserstein_lipschitz(Kernel::Identity(4, 4), d), 1.0);
    EXPECT_NEAR(kernel_wasserstein_lipschitz(Kernel::Constant(4, 4, 0.25), d), 0.0, 1e-15);
}

TEST(KernelLipschitz, GridworldIsAtMostMapConstant) {
    const Gridworld g = make_gridworld();
    const KernelLipschitz k = kernel_wasserstein_lipschitz(g.mdp);
    EXPECT_EQ(k.per_action.size(), 4u);
    EXPECT_LE(k.max, 2.0 + 1e-12);
    EXPECT_GT(k.max, 0.0);
}

TEST(KernelLipschitzProperty, MapConstantDominatesKernelConstant) {
    std::mt19937_64 rng(404);
    std::uniform_int_distribution<Index> states(2, 6), maps(1, 4);
    for (int trial = 0; trial < 100; ++trial) {
        const Index n = states(rng), m = maps(rng);
        std::uniform_int_distribution<Index> dest(0, n - 1);
        std::vector<StateMap> fs(static_cast<std::size_t>(m), StateMap(static_cast<std::size_t>(n)));
        for (auto& f : fs)
            for (auto& v : f) v = dest(rng);
        Matrix w(1, m);
        w.row(0) = random_distribution(m, rng).mass().transpose();
        const DeterministicModelClass model(n, fs, w);
        const Metric d = random_euclidean_metric(n, 2, rng);
        const double k_w = kernel_wasserstein_lipschitz(model_class_to_kernel(model), d).max;
        EXPECT_LE(k_w, model_class_lipschitz(model, d) + 1e-9);
    }
}

TEST(KernelLipschitzProperty, DiracPairsAreWithinTheConstant) {
    std::mt19937_64 rng(405);
    for (int trial = 0; trial < 50; ++trial) {
        const Index n = 3 + trial % 6;
        const Kernel k = random_kernel(n, rng);
        const Metric d = random_euclidean_metric(n, 2, rng);
        const double kw = kernel_wasserstein_lipschitz(k, d);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) {
                const double w = wasserstein(push_forward(k, Distribution::dirac(n, i)),
                                             push_forward(k, Distribution::dirac(n, j)), d);
                EXPECT_LE(w, kw * d(i, j) + 1e-9);
            }
    }
}

TEST(ComposeConstants, ProductAndEmpty) {
    EXPECT_EQ(compose_constants({2.0, 3.0}), 6.0);
    EXPECT_EQ(compose_constants(std::span<const double>{}), 1.0);
    EXPECT_THROW(compose_constants({2.0, -1.0}), std::invalid_argument);
}

TEST(LayerLipschitz, HandComputedMatrix) {
    const Layer l = linear_layer(two_by_two());
    EXPECT_DOUBLE_EQ(layer_lipschitz(l, NormP::inf), 7.0);
    EXPECT_DOUBLE_EQ(layer_lipschitz(l, NormP::one), 6.0);
    EXPECT_DOUBLE_EQ(layer_lipschitz(l, NormP::two), std::sqrt(30.0));
}

TEST(LayerLipschitz, BiasAndReluDoNotChangeTheConstant) {
    Layer l = linear_layer(two_by_two(), Activation::relu);
    l.bias << 5.0, -5.0;
    EXPECT_DOUBLE_EQ(layer_lipschitz(l, NormP::inf), 7.0);
    for (NormP p : {NormP::one, NormP::two, NormP::inf}) {
        EXPECT_EQ(relu_lipschitz(p), 1.0);
        EXPECT_EQ(bias_lipschitz(p), 1.0);
    }
}

TEST(NetworkLipschitz, TwoLayersMultiply) {
    Matrix w2(1, 2);
    w2 << 1.0, -1.0;
    const LayeredNet net({linear_layer(two_by_two(), Activation::relu), linear_layer(w2)});
    EXPECT_DOUBLE_EQ(network_lipschitz(net, NormP::inf), 14.0);
}

TEST(LayerLipschitzProperty, SampledRatiosStayUnderTheBound) {
    std::mt19937_64 rng(406);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (NormP p : {NormP::one, NormP::two, NormP::inf}) {
        for (int trial = 0; trial < 50; ++trial) {
            const LayeredNet net = LayeredNet::random_mlp({3, 8, 8, 2}, rng);
            const double bound = network_lipschitz(net, p);
            for (int k = 0; k < 40; ++k) {
                Vector x(3), y(3);
                for (Index i = 0; i < 3; ++i) x[i] = u(rng), y[i] = u(rng);
                const double num = vector_norm(net.forward(x) - net.forward(y), p);
                EXPECT_LE(num, bound * vector_norm(x - y, p) * (1 + 1e-12));
            }
        }
    }
}

TEST(LayerLipschitz, InfNormBoundIsAttainedBySignVector) {
    const Matrix w = two_by_two();
    const Vector x = Vector::Ones(2);
    // Row 2 has the largest L1 norm and all-positive signs.
    EXPECT_DOUBLE_EQ((w * x).lpNorm<Eigen::Infinity>(), matrix_lipschitz(w, NormP::inf));
}

TEST(OperatorBound, MaxOnHandPair) {
    Vector a(2), b(2);
    a << 1, 2;
    b << 1, 3;
    EXPECT_DOUBLE_EQ(operator_constant_check(BackupOperator::max(), {{a, b}}), 1.0);
}

TEST(OperatorBound, NonExpansionsStayAtOne) {
    std::mt19937_64 rng(407);
    const auto pairs = random_vector_pairs(4, 2000, 5.0, rng);
    for (const BackupOperator& op : {BackupOperator::max(), BackupOperator::mean(), BackupOperator::eps_greedy(0.1),
                                     BackupOperator::mellowmax(5.0)}) {
        EXPECT_EQ(operator_lipschitz_bound(op, 4, sampled_vmax(pairs)), 1.0);
        EXPECT_LE(operator_constant_check(op, pairs), 1.0 + 1e-9) << op.name();
    }
}

TEST(OperatorBound, BoltzmannStatedConstantHolds) {
    std::mt19937_64 rng(408);
    const auto pairs = random_vector_pairs(3, 2000, 2.0, rng);
    const BackupOperator op = BackupOperator::boltzmann(2.0);
    const double bound = operator_lipschitz_bound(op, 3, sampled_vmax(pairs));
    EXPECT_NEAR(bound, std::sqrt(3.0) + 2.0 * sampled_vmax(pairs) * 3.0, 1e-12);
    EXPECT_LE(operator_constant_check(op, pairs), bound);
}

TEST(CompoundingBound, HandValues) {
    EXPECT_DOUBLE_EQ(compounding_bound({0.1, 1.0, 0.0, 0.0, 5}), 0.5);
    // 0.1 (1 + 2 + 4) = 0.7
    EXPECT_NEAR(compounding_bound({0.1, 2.0, 0.0, 0.0, 3}), 0.7, 1e-15);
    EXPECT_EQ(compounding_bound({0.0, 3.0, 0.0, 0.0, 4}), 0.0);
    EXPECT_THROW(compounding_bound({0.1, 1.0, 0.0, 0.0, 0}), std::invalid_argument);
}

TEST(ValueBound, HandValuesAndInapplicable) {
    // 0.5 * 1 * 0.2 / (0.5 * 0.5)
    EXPECT_NEAR(value_bound({0.2, 1.0, 1.0, 0.5, 1}), 0.4, 1e-15);
    EXPECT_EQ(value_bound({0.0, 1.0, 1.0, 0.5, 1}), 0.0);
    EXPECT_THROW(value_bound({0.2, 2.0, 1.0, 0.9, 1}), BoundInapplicable);
    EXPECT_THROW(value_bound({0.2, 1.0, 1.0, 1.0, 1}), std::invalid_argument);
}

TEST(ValueBound, MonotoneInEveryArgument) {
    const BoundInputs base{0.1, 0.8, 1.0, 0.7, 1};
    const double v = value_bound(base);
    BoundInputs b = base;
    b.delta = 0.2;
    EXPECT_GT(value_bound(b), v);
    b = base;
    b.k_bar = 0.9;
    EXPECT_GT(value_bound(b), v);
    b = base;
    b.k_r = 2.0;
    EXPECT_GT(value_bound(b), v);
    b = base;
    b.gamma = 0.8;
    EXPECT_GT(value_bound(b), v);
}

TEST(GviValueLipschitzBound, HandValues) {
    EXPECT_DOUBLE_EQ(gvi_value_lipschitz_bound(1.0, 0.0, 3.0), 1.0);
    EXPECT_NEAR(gvi_value_lipschitz_bound(1.0, 0.9, 1.0), 10.0, 1e-12);
    EXPECT_THROW(gvi_value_lipschitz_bound(1.0, 0.5, 2.0), BoundInapplicable);
}
