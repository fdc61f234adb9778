#pragma once

// Built-in fixtures: the 4x3 slip gridworld, a slip chain, and two-point
// measures with shifted supports on a line.

#include "lipmbrl/core_mdp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lipmbrl {

// *******************************************************
// Gridworld
// *******************************************************

/// 4x3 grid with a blocked cell at (1,1). Moves into a wall or the blocked
/// cell leave the agent in place. Each action moves as intended with
/// probability 0.8 and sideways with 0.1 each; the reverse move has weight 0.
struct Gridworld {
    static constexpr int width = 4;
    static constexpr int height = 3;
    static constexpr std::array<int, 2> blocked{1, 1};
    /// Action order; the same order indexes the direction maps.
    enum Action : Index { up = 0, down = 1, left = 2, right = 3 };

    /// (x, y) of each state, row-major over the grid with the blocked cell skipped.
    std::vector<std::array<int, 2>> cells;
    Metric metric;
    DeterministicModelClass model;
    FiniteMetricMDP mdp;

    Index state_of(int x, int y) const {
        for (std::size_t i = 0; i < cells.size(); ++i)
            if (cells[i][0] == x && cells[i][1] == y) return static_cast<Index>(i);
        throw std::out_of_range("no state at (" + std::to_string(x) + "," + std::to_string(y) + ")");
    }
};

inline Gridworld make_gridworld(double discount = 0.9) {
    Gridworld g;
    for (int y = 0; y < Gridworld::height; ++y)
        for (int x = 0; x < Gridworld::width; ++x)
            if (!(x == Gridworld::blocked[0] && y == Gridworld::blocked[1])) g.cells.push_back({x, y});
    const auto n = static_cast<Index>(g.cells.size());

    Matrix d(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            d(i, j) = std::abs(g.cells[static_cast<std::size_t>(i)][0] - g.cells[static_cast<std::size_t>(j)][0]) +
                      std::abs(g.cells[static_cast<std::size_t>(i)][1] - g.cells[static_cast<std::size_t>(j)][1]);
    g.metric = Metric(d);

    const std::array<std::array<int, 2>, 4> step{{{0, 1}, {0, -1}, {-1, 0}, {1, 0}}};
    std::vector<StateMap> maps;
    for (const auto& [dx, dy] : step) {
        StateMap f(static_cast<std::size_t>(n));
        for (Index s = 0; s < n; ++s) {
            const int x = g.cells[static_cast<std::size_t>(s)][0] + dx;
            const int y = g.cells[static_cast<std::size_t>(s)][1] + dy;
            const bool inside = x >= 0 && x < Gridworld::width && y >= 0 && y < Gridworld::height;
            const bool open = !(x == Gridworld::blocked[0] && y == Gridworld::blocked[1]);
            f[static_cast<std::size_t>(s)] = inside && open ? g.state_of(x, y) : s;
        }
        maps.push_back(std::move(f));
    }
    // Rows: action; columns: map (up, down, left, right).
    Matrix w(4, 4);
    w << 0.8, 0.0, 0.1, 0.1,  //
        0.0, 0.8, 0.1, 0.1,   //
        0.1, 0.1, 0.8, 0.0,   //
        0.1, 0.1, 0.0, 0.8;
    g.model = DeterministicModelClass(n, std::move(maps), w);

    Vector r = Vector::Constant(n, -0.04);
    r[g.state_of(3, 2)] = 1.0;
    r[g.state_of(3, 1)] = -1.0;
    g.mdp = FiniteMetricMDP(model_class_to_kernel(g.model), std::move(r), discount, g.metric);
    return g;
}

// *******************************************************
// Chain
// *******************************************************

/// n states on a line with left/right actions that succeed with probability
/// `success` and otherwise stay put; reward = state index; metric |i - j|.
inline FiniteMetricMDP make_chain(Index n = 5, double success = 0.8, double discount = 0.9) {
    if (n < 2) throw std::invalid_argument("chain needs at least two states");
    Kernel left = Kernel::Zero(n, n), right = Kernel::Zero(n, n);
    for (Index s = 0; s < n; ++s) {
        left(s, std::max<Index>(s - 1, 0)) += success;
        left(s, s) += 1.0 - success;
        right(s, std::min<Index>(s + 1, n - 1)) += success;
        right(s, s) += 1.0 - success;
    }
    Vector r(n);
    for (Index s = 0; s < n; ++s) r[s] = static_cast<double>(s);
    return FiniteMetricMDP({left, right}, std::move(r), discount, Metric::index_line(n));
}

// *******************************************************
// Shifted constants
// *******************************************************

/// mu1 = (delta_{-c1} + delta_{+c1})/2 and mu2 = (delta_{-c2} + delta_{+c2})/2
/// on the sorted support {-c1, -c2, c2, c1} (or its mirror when c2 > c1).
struct ShiftedPair {
    std::vector<double> support;
    Metric metric;
    Distribution mu1, mu2;
};

inline ShiftedPair make_shifted_constants(double c1, double c2) {
    if (!(c1 > 0.0) || !(c2 > 0.0) || c1 == c2) throw std::invalid_argument("need distinct positive constants");
    const double hi = std::max(c1, c2), lo = std::min(c1, c2);
    ShiftedPair p;
    p.support = {-hi, -lo, lo, hi};
    p.metric = Metric::line(p.support);
    Vector outer(4), inner(4);
    outer << 0.5, 0.0, 0.0, 0.5;
    inner << 0.0, 0.5, 0.5, 0.0;
    p.mu1 = Distribution(c1 > c2 ? outer : inner);
    p.mu2 = Distribution(c1 > c2 ? inner : outer);
    return p;
}

}  // namespace lipmbrl
