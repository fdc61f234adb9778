#pragma once

// Two-phase dense tableau simplex for  min c^T x  s.t.  A x = b,  x >= 0.
// Dantzig pricing with a permanent switch to Bland's rule after a streak of
// degenerate pivots. Returns the primal solution and the row duals y with
// c - A^T y >= 0 at optimality.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace lipmbrl::detail {

struct LpSolution {
    Eigen::VectorXd x;
    Eigen::VectorXd duals;
    std::vector<Eigen::Index> basis;  // basic column per row; >= n marks an artificial
    double objective = 0.0;
    int pivots = 0;
};

class DenseSimplex {
public:
    DenseSimplex(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c)
        : m_(A.rows()), n_(A.cols()), sign_(Eigen::VectorXd::Ones(A.rows())), c_(c) {
        if (b.size() != m_ || c.size() != n_) throw std::invalid_argument("LP dimension mismatch");
        // Columns: [ originals | artificials | rhs ], last row holds reduced costs.
        t_.setZero(m_ + 1, n_ + m_ + 1);
        for (Eigen::Index r = 0; r < m_; ++r) {
            if (b[r] < 0.0) sign_[r] = -1.0;
            t_.row(r).head(n_) = sign_[r] * A.row(r);
            t_(r, n_ + r) = 1.0;
            t_(r, rhs()) = sign_[r] * b[r];
        }
        basis_.resize(static_cast<std::size_t>(m_));
        for (Eigen::Index r = 0; r < m_; ++r) basis_[static_cast<std::size_t>(r)] = n_ + r;
        scale_ = std::max(1.0, A.cwiseAbs().maxCoeff());
    }

    LpSolution solve() {
        // Phase 1: minimize the sum of artificials.
        t_.row(m_).setZero();
        for (Eigen::Index r = 0; r < m_; ++r) t_.row(m_).head(n_) -= t_.row(r).head(n_);
        t_(m_, rhs()) = -t_.col(rhs()).head(m_).sum();
        iterate(n_);
        const double infeasibility = -t_(m_, rhs());
        if (infeasibility > 1e-9 * std::max(1.0, t_.col(rhs()).head(m_).cwiseAbs().maxCoeff()))
            throw std::runtime_error("LP is infeasible");
        drive_out_artificials();

        // Phase 2: reduced costs of the original objective for the current basis.
        t_.row(m_).setZero();
        t_.row(m_).head(n_) = c_.transpose();
        for (Eigen::Index r = 0; r < m_; ++r) {
            const Eigen::Index bcol = basis_[static_cast<std::size_t>(r)];
            const double cb = bcol < n_ ? c_[bcol] : 0.0;
            if (cb != 0.0) t_.row(m_) -= cb * t_.row(r);
        }
        iterate(n_);

        LpSolution sol;
        sol.x = Eigen::VectorXd::Zero(n_);
        for (Eigen::Index r = 0; r < m_; ++r) {
            const Eigen::Index bcol = basis_[static_cast<std::size_t>(r)];
            if (bcol < n_) sol.x[bcol] = t_(r, rhs());
        }
        // Artificial column r carries -y'_r in the cost row; undo the row sign flip.
        sol.duals = Eigen::VectorXd(m_);
        for (Eigen::Index r = 0; r < m_; ++r) sol.duals[r] = -sign_[r] * t_(m_, n_ + r);
        sol.basis = basis_;
        sol.objective = c_.dot(sol.x);
        sol.pivots = pivots_;
        return sol;
    }

private:
    Eigen::Index rhs() const { return n_ + m_; }

    void pivot(Eigen::Index row, Eigen::Index col) {
        t_.row(row) /= t_(row, col);
        for (Eigen::Index r = 0; r <= m_; ++r) {
            if (r == row) continue;
            const double f = t_(r, col);
            if (f != 0.0) t_.row(r) -= f * t_.row(row);
        }
        basis_[static_cast<std::size_t>(row)] = col;
        ++pivots_;
    }

    // Pivots until no column below `limit` has a negative reduced cost.
    void iterate(Eigen::Index limit) {
        const double eps = 1e-12 * scale_;
        const double piv_tol = 1e-11;
        int degenerate_streak = 0;
        bool bland = false;
        for (;;) {
            Eigen::Index enter = -1;
            double best = -eps;
            for (Eigen::Index j = 0; j < limit; ++j) {
                const double rc = t_(m_, j);
                if (rc < best) {
                    best = rc;
                    enter = j;
                    if (bland) break;
                }
            }
            if (enter < 0) return;
            Eigen::Index leave = -1;
            double ratio = std::numeric_limits<double>::infinity();
            for (Eigen::Index r = 0; r < m_; ++r) {
                const double a = t_(r, enter);
                if (a <= piv_tol) continue;
                const double q = std::max(0.0, t_(r, rhs())) / a;
                if (leave < 0 || q < ratio || (q == ratio && basis_[static_cast<std::size_t>(r)] <
                                                     basis_[static_cast<std::size_t>(leave)])) {
                    ratio = q;
                    leave = r;
                }
            }
            if (leave < 0) throw std::runtime_error("LP is unbounded");
            if (pivots_ > 200000) throw std::runtime_error("LP simplex exceeded pivot limit");
            pivot(leave, enter);
            if (ratio == 0.0) {
                if (++degenerate_streak > 50) bland = true;
            } else {
                degenerate_streak = 0;
            }
        }
    }

    void drive_out_artificials() {
        for (Eigen::Index r = 0; r < m_; ++r) {
            if (basis_[static_cast<std::size_t>(r)] < n_) continue;
            Eigen::Index col = -1;
            double best = 1e-9;
            for (Eigen::Index j = 0; j < n_; ++j)
                if (std::abs(t_(r, j)) > best) {
                    best = std::abs(t_(r, j));
                    col = j;
                }
            if (col >= 0) pivot(r, col);  // otherwise the row is redundant
        }
    }

    Eigen::Index m_, n_;
    Eigen::VectorXd sign_;
    Eigen::VectorXd c_;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> t_;
    std::vector<Eigen::Index> basis_;
    double scale_ = 1.0;
    int pivots_ = 0;
};

inline LpSolution minimize_standard_form(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
    DenseSimplex simplex(A, b, c);
    return simplex.solve();
}

}  // namespace lipmbrl::detail
