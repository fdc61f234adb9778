#include "lipmbrl/core_mdp.hpp"
#include "lipmbrl/experiments.hpp"
#include "lipmbrl/fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace lipmbrl;

namespace {

FiniteMetricMDP two_state_mrp() {
    Kernel k(2, 2);
    k << 0.3, 0.7, 0.6, 0.4;
    return FiniteMetricMDP({k}, Vector::Zero(2), 0.9, Metric::index_line(2));
}

bool mentions(const std::vector<std::string>& report, const std::string& needle) {
    for (const auto& line : report)
        if (line.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST(Distribution, RejectsBadMass) {
    EXPECT_THROW(Distribution(Vector::Zero(0)), std::invalid_argument);
    Vector neg(2);
    neg << 1.5, -0.5;
    EXPECT_THROW(Distribution{neg}, std::invalid_argument);
    Vector short_mass(2);
    short_mass << 0.5, 0.4;
    EXPECT_THROW(Distribution{short_mass}, std::invalid_argument);
    EXPECT_THROW(Distribution::dirac(3, 3), std::out_of_range);
}

TEST(Validate, ValidMrpHasEmptyReport) { EXPECT_TRUE(validate(two_state_mrp()).empty()); }

TEST(Validate, NamesRowThatDoesNotSumToOne) {
    Kernel k(2, 2);
    k << 0.3, 0.6, 0.6, 0.4;
    const FiniteMetricMDP mdp({k}, Vector::Zero(2), 0.9, Metric::index_line(2));
    const auto report = validate(mdp);
    ASSERT_FALSE(report.empty());
    EXPECT_TRUE(mentions(report, "row 0 sums to 0.8999"));
}

TEST(Validate, ReportsTriangleViolation) {
    Matrix d(3, 3);
    d << 0, 5, 10, 5, 0, 1, 10, 1, 0;
    const FiniteMetricMDP mdp({Kernel::Identity(3, 3)}, Vector::Zero(3), 0.5, Metric(d));
    EXPECT_TRUE(mentions(validate(mdp), "triangle inequality"));
    EXPECT_THROW(Metric::checked(d), std::invalid_argument);
}

TEST(Validate, ReportsDiscountAndShapeProblems) {
    const FiniteMetricMDP bad_discount = two_state_mrp().with_discount(1.0);
    EXPECT_TRUE(mentions(validate(bad_discount), "discount"));
    const FiniteMetricMDP bad_metric({Kernel::Identity(2, 2)}, Vector::Zero(2), 0.5, Metric::index_line(3));
    EXPECT_TRUE(mentions(validate(bad_metric), "metric size"));
}

TEST(PushForward, IdentityKernelKeepsDistribution) {
    const FiniteMetricMDP mdp({Kernel::Identity(3, 3)}, Vector::Zero(3), 0.5, Metric::index_line(3));
    Vector m(3);
    m << 0.2, 0.5, 0.3;
    const Distribution mu(m);
    EXPECT_TRUE(push_forward(mdp, mu, 0).mass().isApprox(m, 1e-15));
    const std::vector<Index> actions{0, 0, 0, 0};
    EXPECT_TRUE(push_forward_n(mdp, mu, actions).mass().isApprox(m, 1e-15));
}

TEST(PushForward, DiracGivesKernelRow) {
    const Distribution nu = push_forward(two_state_mrp(), Distribution::dirac(2, 0), 0);
    EXPECT_NEAR(nu[0], 0.3, 1e-15);
    EXPECT_NEAR(nu[1], 0.7, 1e-15);
}

TEST(PushForward, HandComputedExample) {
    const Distribution nu = push_forward(two_state_mrp(), Distribution::uniform(2), 0);
    EXPECT_NEAR(nu[0], 0.45, 1e-15);
    EXPECT_NEAR(nu[1], 0.55, 1e-15);
}

TEST(PushForward, ActionOutOfRangeThrows) {
    EXPECT_THROW(push_forward(two_state_mrp(), Distribution::uniform(2), 1), std::out_of_range);
    EXPECT_THROW(push_forward(two_state_mrp(), Distribution::uniform(2), -1), std::out_of_range);
}

TEST(PushForwardN, EmptySequenceThrows) {
    EXPECT_THROW(push_forward_n(two_state_mrp(), Distribution::uniform(2), std::span<const Index>{}),
                 std::invalid_argument);
}

TEST(PushForwardN, LengthOneMatchesSingleStep) {
    const std::vector<Index> one{0};
    const auto mdp = two_state_mrp();
    EXPECT_TRUE(push_forward_n(mdp, Distribution::uniform(2), one).mass().isApprox(
        push_forward(mdp, Distribution::uniform(2), 0).mass(), 1e-15));
}

TEST(PushForwardN, TwoStepsMatchSquaredKernel) {
    const auto mdp = two_state_mrp();
    const std::vector<Index> two{0, 0};
    Vector m(2);
    m << 0.9, 0.1;
    const Distribution mu(m);
    const Matrix sq = mdp.kernel(0) * mdp.kernel(0);
    const Vector expected = sq.transpose() * m;
    EXPECT_TRUE(push_forward_n(mdp, mu, two).mass().isApprox(expected, 1e-14));
}

TEST(PushForwardProperty, PreservesMassAndIsLinear) {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Index n = 2 + trial % 9;
        const Kernel k = random_kernel(n, rng);
        const Distribution mu1 = random_distribution(n, rng), mu2 = random_distribution(n, rng);
        const double alpha = unit(rng);
        const Distribution nu1 = push_forward(k, mu1), nu2 = push_forward(k, mu2);
        EXPECT_NEAR(nu1.mass().sum(), 1.0, 1e-12);
        const Distribution mix(alpha * mu1.mass() + (1 - alpha) * mu2.mass(), kArithmeticTol);
        const Vector lhs = push_forward(k, mix).mass();
        const Vector rhs = alpha * nu1.mass() + (1 - alpha) * nu2.mass();
        EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(ModelClass, SingleMapIsDeterministicKernel) {
    const DeterministicModelClass model(3, {{1, 2, 0}}, Matrix::Ones(1, 1));
    const Kernel k = model_class_to_kernel(model).front();
    Kernel expected = Kernel::Zero(3, 3);
    expected(0, 1) = expected(1, 2) = expected(2, 0) = 1.0;
    EXPECT_EQ(k, expected);
}

TEST(ModelClass, RejectsInvalidInput) {
    EXPECT_THROW(DeterministicModelClass(2, {{0, 2}}, Matrix::Ones(1, 1)), std::invalid_argument);
    Matrix w(1, 2);
    w << 0.5, 0.6;
    EXPECT_THROW(DeterministicModelClass(2, {{0, 1}, {1, 0}}, w), std::invalid_argument);
}

TEST(ModelClass, GridworldSplitsEightyTenTen) {
    const Gridworld g = make_gridworld();
    const Kernel& up = g.mdp.kernel(Gridworld::up);
    // From (0,0): up reaches (0,1), left is a wall (stay), right reaches (1,0).
    const Index s = g.state_of(0, 0);
    EXPECT_DOUBLE_EQ(up(s, g.state_of(0, 1)), 0.8);
    EXPECT_DOUBLE_EQ(up(s, s), 0.1);
    EXPECT_DOUBLE_EQ(up(s, g.state_of(1, 0)), 0.1);
    for (const Kernel& k : g.mdp.transitions())
        for (Index r = 0; r < k.rows(); ++r) EXPECT_NEAR(k.row(r).sum(), 1.0, 1e-15);
    EXPECT_EQ(g.mdp.n_states(), 11);
    EXPECT_TRUE(validate(g.mdp).empty());
}

TEST(ModelClass, TwoStateThreeMapExampleReconstructs) {
    Matrix w(1, 3);
    w << 0.3, 0.3, 0.4;
    const DeterministicModelClass model(2, {{0, 0}, {1, 0}, {1, 1}}, w);
    Kernel expected(2, 2);
    expected << 0.3, 0.7, 0.6, 0.4;
    EXPECT_TRUE(model_class_to_kernel(model).front().isApprox(expected, 1e-15));
}

TEST(ModelClassProperty, PushForwardMatchesMapSequenceEnumeration) {
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<Index> states(2, 5), map_count(1, 4), actions(1, 2), steps(1, 3);
    for (int trial = 0; trial < 60; ++trial) {
        const Index n = states(rng), m = map_count(rng), na = actions(rng);
        std::uniform_int_distribution<Index> dest(0, n - 1);
        std::vector<StateMap> maps(static_cast<std::size_t>(m), StateMap(static_cast<std::size_t>(n)));
        for (auto& f : maps)
            for (auto& v : f) v = dest(rng);
        Matrix w(na, m);
        for (Index a = 0; a < na; ++a) w.row(a) = random_distribution(m, rng).mass().transpose();
        const DeterministicModelClass model(n, maps, w);
        const auto kernels = model_class_to_kernel(model);
        for (const Kernel& k : kernels)
            for (Index r = 0; r < n; ++r) EXPECT_NEAR(k.row(r).sum(), 1.0, 1e-12);
        std::vector<Index> seq(static_cast<std::size_t>(steps(rng)));
        std::uniform_int_distribution<Index> act(0, na - 1);
        for (auto& a : seq) a = act(rng);
        const Distribution mu = random_distribution(n, rng);
        const Vector expected = oracle::map_sequence_push(maps, w, mu.mass(), seq);
        EXPECT_LE((push_forward_n(kernels, mu, seq).mass() - expected).cwiseAbs().maxCoeff(), 1e-12);
    }
}
