#include "lipmbrl/fixtures.hpp"
#include "lipmbrl/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <limits>

using namespace lipmbrl;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "lipmbrl_io_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST(FormatDouble, RoundTripsAndSpecials) {
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
    EXPECT_EQ(format_double(2.0), "2");
    EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
    EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-inf");
    EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
    EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(MdpJson, RoundTripIsExact) {
    const Gridworld g = make_gridworld();
    const auto path = scratch("grid.json");
    save_mdp(g.mdp, path);
    const FiniteMetricMDP back = load_mdp(path);
    ASSERT_EQ(back.n_actions(), 4);
    for (Index a = 0; a < 4; ++a) EXPECT_EQ(back.kernel(a), g.mdp.kernel(a));
    EXPECT_EQ(back.rewards(), g.mdp.rewards());
    EXPECT_EQ(back.discount(), g.mdp.discount());
    EXPECT_EQ(back.metric().distances(), g.metric.distances());
}

TEST(MdpJson, ActionRewardsSurvive) {
    Matrix ar(2, 2);
    ar << 1, 2, 3, 4;
    const FiniteMetricMDP m({Kernel::Identity(2, 2), Kernel::Identity(2, 2)}, Vector::Zero(2), 0.5,
                            Metric::index_line(2), ar);
    const FiniteMetricMDP back = mdp_from_json(mdp_to_json(m));
    ASSERT_TRUE(back.action_rewards().has_value());
    EXPECT_EQ(*back.action_rewards(), ar);
}

TEST(MdpJson, MissingFileNamesThePath) {
    try {
        load_mdp("/nonexistent/where.json");
        FAIL() << "expected IoError";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/where.json"), std::string::npos);
    }
}

TEST(MdpJson, InvalidContentIsReported) {
    const auto path = scratch("bad.json");
    {
        std::ofstream out(path);
        out << R"({"n_states": 2, "n_actions": 1, "transitions": [[[0.5, 0.4], [0, 1]]],
                   "rewards": [0, 0], "discount": 0.9, "metric": [[0, 1], [1, 0]]})";
    }
    try {
        load_mdp(path);
        FAIL() << "expected IoError";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("row 0"), std::string::npos) << e.what();
    }
    {
        std::ofstream out(path);
        out << "{not json";
    }
    EXPECT_THROW(load_mdp(path), IoError);
}

TEST(CsvWriter, HeaderRowsAndWidthCheck) {
    CsvWriter csv({"a", "b"});
    csv.row({"1", "x"}).row({"2", "y"});
    EXPECT_EQ(csv.str(), "a,b\n1,x\n2,y\n");
    EXPECT_EQ(csv.size(), 2u);
    EXPECT_THROW(csv.row({"only"}), std::invalid_argument);
}

TEST(EnsureWritableDir, CreatesNestedDirectories) {
    const auto dir = scratch("nested") / "deeper";
    std::filesystem::remove_all(dir);
    ensure_writable_dir(dir);
    EXPECT_TRUE(std::filesystem::is_directory(dir));
    EXPECT_THROW(ensure_writable_dir("/proc/version/sub"), IoError);
}

TEST(Fixtures, ChainAndShiftedPair) {
    const FiniteMetricMDP c = make_chain(4);
    EXPECT_TRUE(validate(c).empty());
    EXPECT_DOUBLE_EQ(c.kernel(1)(0, 1), 0.8);
    EXPECT_DOUBLE_EQ(c.kernel(0)(0, 0), 1.0);
    EXPECT_THROW(make_chain(1), std::invalid_argument);
    EXPECT_THROW(make_shifted_constants(1.0, 1.0), std::invalid_argument);
}
