#pragma once

// Backup operators that summarize a row of action values into one number.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace lipmbrl {

enum class BackupKind { max, mean, eps_greedy, mellowmax, boltzmann };

struct BackupOperator {
    BackupKind kind = BackupKind::max;
    double param = 0.0;  // epsilon for eps_greedy, beta for mellowmax / boltzmann

    static BackupOperator max() { return {BackupKind::max, 0.0}; }
    static BackupOperator mean() { return {BackupKind::mean, 0.0}; }
    static BackupOperator eps_greedy(double eps) {
        if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("epsilon must lie in [0,1]");
        return {BackupKind::eps_greedy, eps};
    }
    static BackupOperator mellowmax(double beta) {
        if (!(beta > 0.0)) throw std::invalid_argument("mellowmax beta must be positive");
        return {BackupKind::mellowmax, beta};
    }
    static BackupOperator boltzmann(double beta) {
        if (!(beta > 0.0)) throw std::invalid_argument("boltzmann beta must be positive");
        return {BackupKind::boltzmann, beta};
    }

    /// Parses "max", "mean", "eps_greedy", "mellowmax", "boltzmann".
    static BackupOperator parse(const std::string& name, double param) {
        if (name == "max") return max();
        if (name == "mean") return mean();
        if (name == "eps_greedy" || name == "eps-greedy") return eps_greedy(param);
        if (name == "mellowmax") return mellowmax(param);
        if (name == "boltzmann") return boltzmann(param);
        throw std::invalid_argument("unknown backup operator '" + name + "'");
    }

    /// True for the operators with Lipschitz constant 1 under the max norm.
    bool is_non_expansion() const { return kind != BackupKind::boltzmann; }

    std::string name() const {
        switch (kind) {
            case BackupKind::max: return "max";
            case BackupKind::mean: return "mean";
            case BackupKind::eps_greedy: return "eps_greedy";
            case BackupKind::mellowmax: return "mellowmax";
            case BackupKind::boltzmann: return "boltzmann";
        }
        return "?";
    }
};

/// Applies the operator to a row of action values. Exponentials are shifted by
/// the row maximum, so large beta stays finite.
template <typename Derived>
double backup_apply(const BackupOperator& op, const Eigen::DenseBase<Derived>& row) {
    const Eigen::Index n = row.size();
    if (n == 0) throw std::invalid_argument("backup of an empty row");
    const double hi = row.maxCoeff();
    switch (op.kind) {
        case BackupKind::max: return hi;
        case BackupKind::mean: return row.mean();
        case BackupKind::eps_greedy: return (1.0 - op.param) * hi + op.param * row.mean();
        case BackupKind::mellowmax: {
            // log(mean exp(beta x)) / beta
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) acc += std::exp(op.param * (row(i) - hi));
            return hi + std::log(acc / static_cast<double>(n)) / op.param;
        }
        case BackupKind::boltzmann: {
            double num = 0.0, den = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double e = std::exp(op.param * (row(i) - hi));
                num += row(i) * e;
                den += e;
            }
            return num / den;
        }
    }
    throw std::logic_error("unhandled backup kind");
}

}  // namespace lipmbrl
