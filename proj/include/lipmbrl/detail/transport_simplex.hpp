#pragma once

// Transportation simplex (MODI / u-v method) on a dense bipartite instance.
//
// The basis is kept as a spanning tree over m row nodes and k column nodes
// (m + k - 1 cells, degenerate zero cells included). Entering cells are chosen
// by most negative reduced cost; after a streak of degenerate pivots the
// solver switches permanently to Bland's rule (smallest index entering and
// leaving), which rules out cycling.

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace lipmbrl::detail {

struct TransportSolution {
    Eigen::MatrixXd plan;
    Eigen::VectorXd row_potential;
    Eigen::VectorXd col_potential;
    int pivots = 0;
};

class TransportSimplex {
public:
    TransportSimplex(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand, const Eigen::MatrixXd& cost)
        : m_(supply.size()), k_(demand.size()), cost_(cost), plan_(Eigen::MatrixXd::Zero(m_, k_)) {
        if (m_ == 0 || k_ == 0) throw std::invalid_argument("transportation problem needs nonempty sides");
        if (cost.rows() != m_ || cost.cols() != k_) throw std::invalid_argument("cost matrix shape mismatch");
        north_west_corner(supply, demand);
    }

    TransportSolution solve(int max_pivots = 1'000'000) {
        const double cmax = std::max(1.0, cost_.cwiseAbs().maxCoeff());
        const double eps = 1e-13 * cmax;
        const Eigen::Index nodes = m_ + k_;
        int degenerate_streak = 0;
        bool bland = false;
        int pivots = 0;
        for (;;) {
            build_adjacency();
            compute_potentials();

            Eigen::Index ei = -1, ej = -1;
            double best = -eps;
            for (Eigen::Index i = 0; i < m_ && !(bland && ei >= 0); ++i)
                for (Eigen::Index j = 0; j < k_; ++j) {
                    if (basic_[idx(i, j)]) continue;
                    const double r = cost_(i, j) - u_[i] - v_[j];
                    if (r < best) {
                        best = r;
                        ei = i;
                        ej = j;
                        if (bland) break;
                    }
                }
            if (ei < 0) break;
            if (++pivots > max_pivots) throw std::runtime_error("transportation simplex exceeded pivot limit");

            // Tree path from column node of the entering cell back to its row node.
            const std::vector<std::size_t> path = tree_path(m_ + ej, ei);
            double theta = std::numeric_limits<double>::infinity();
            std::size_t leave = path.size();
            for (std::size_t p = 0; p < path.size(); p += 2) {
                const auto [ci, cj] = cells_[path[p]];
                const double x = plan_(ci, cj);
                if (x < theta || (x == theta && cell_key(path[p]) < cell_key(path[leave]))) {
                    theta = x;
                    leave = p;
                }
            }
            plan_(ei, ej) += theta;
            for (std::size_t p = 0; p < path.size(); ++p) {
                const auto [ci, cj] = cells_[path[p]];
                if (p % 2 == 0)
                    plan_(ci, cj) -= theta;
                else
                    plan_(ci, cj) += theta;
            }
            const std::size_t out = path[leave];
            plan_(cells_[out].first, cells_[out].second) = 0.0;
            basic_[idx(cells_[out].first, cells_[out].second)] = 0;
            cells_[out] = {ei, ej};
            basic_[idx(ei, ej)] = 1;

            if (theta == 0.0) {
                if (++degenerate_streak > 2 * nodes) bland = true;
            } else {
                degenerate_streak = 0;
            }
        }
        return TransportSolution{plan_, u_, v_, pivots};
    }

private:
    std::size_t idx(Eigen::Index i, Eigen::Index j) const { return static_cast<std::size_t>(i * k_ + j); }
    std::size_t cell_key(std::size_t c) const { return idx(cells_[c].first, cells_[c].second); }

    void north_west_corner(Eigen::VectorXd s, Eigen::VectorXd d) {
        basic_.assign(static_cast<std::size_t>(m_ * k_), 0);
        cells_.reserve(static_cast<std::size_t>(m_ + k_ - 1));
        Eigen::Index i = 0, j = 0;
        for (;;) {
            const double x = std::max(0.0, std::min(s[i], d[j]));
            plan_(i, j) = x;
            cells_.emplace_back(i, j);
            basic_[idx(i, j)] = 1;
            s[i] -= x;
            d[j] -= x;
            if (i == m_ - 1 && j == k_ - 1) break;
            if (i == m_ - 1)
                ++j;
            else if (j == k_ - 1)
                ++i;
            else if (s[i] <= d[j])
                ++i;
            else
                ++j;
        }
    }

    // Node ids: rows are 0..m-1, columns are m..m+k-1.
    void build_adjacency() {
        adj_.assign(static_cast<std::size_t>(m_ + k_), {});
        for (std::size_t c = 0; c < cells_.size(); ++c) {
            adj_[static_cast<std::size_t>(cells_[c].first)].push_back(c);
            adj_[static_cast<std::size_t>(m_ + cells_[c].second)].push_back(c);
        }
    }

    Eigen::Index other_end(std::size_t c, Eigen::Index node) const {
        return node < m_ ? m_ + cells_[c].second : cells_[c].first;
    }

    void compute_potentials() {
        u_ = Eigen::VectorXd::Zero(m_);
        v_ = Eigen::VectorXd::Zero(k_);
        std::vector<char> seen(static_cast<std::size_t>(m_ + k_), 0);
        std::vector<Eigen::Index> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            const Eigen::Index node = stack.back();
            stack.pop_back();
            for (std::size_t c : adj_[static_cast<std::size_t>(node)]) {
                const Eigen::Index nb = other_end(c, node);
                if (seen[static_cast<std::size_t>(nb)]) continue;
                seen[static_cast<std::size_t>(nb)] = 1;
                const auto [i, j] = cells_[c];
                if (node < m_)
                    v_[j] = cost_(i, j) - u_[i];
                else
                    u_[i] = cost_(i, j) - v_[j];
                stack.push_back(nb);
            }
        }
    }

    // Cells along the unique tree path from `from` to `to`, listed from `from`.
    std::vector<std::size_t> tree_path(Eigen::Index from, Eigen::Index to) const {
        const auto nodes = static_cast<std::size_t>(m_ + k_);
        std::vector<std::size_t> via(nodes, cells_.size());
        std::vector<char> seen(nodes, 0);
        std::vector<Eigen::Index> queue{to};
        seen[static_cast<std::size_t>(to)] = 1;
        for (std::size_t head = 0; head < queue.size(); ++head) {
            const Eigen::Index node = queue[head];
            if (node == from) break;
            for (std::size_t c : adj_[static_cast<std::size_t>(node)]) {
                const Eigen::Index nb = other_end(c, node);
                if (seen[static_cast<std::size_t>(nb)]) continue;
                seen[static_cast<std::size_t>(nb)] = 1;
                via[static_cast<std::size_t>(nb)] = c;
                queue.push_back(nb);
            }
        }
        std::vector<std::size_t> path;
        Eigen::Index node = from;
        while (node != to) {
            const std::size_t c = via[static_cast<std::size_t>(node)];
            if (c == cells_.size()) throw std::logic_error("transportation basis is not a spanning tree");
            path.push_back(c);
            node = other_end(c, node);
        }
        return path;
    }

    Eigen::Index m_, k_;
    const Eigen::MatrixXd& cost_;
    Eigen::MatrixXd plan_;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> cells_;
    std::vector<char> basic_;
    std::vector<std::vector<std::size_t>> adj_;
    Eigen::VectorXd u_, v_;
};

/// Minimizes sum cost(i,j) x(i,j) subject to row sums = supply, column sums = demand.
inline TransportSolution solve_transportation(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand,
                                              const Eigen::MatrixXd& cost) {
    TransportSimplex simplex(supply, demand, cost);
    return simplex.solve();
}

}  // namespace lipmbrl::detail
