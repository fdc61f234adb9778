#pragma once

// MDP fixtures as JSON and plain CSV output with round-trippable numbers.

#include "lipmbrl/core_mdp.hpp"

#include "json.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lipmbrl {

/// File missing, unreadable, unwritable or malformed.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shortest text that reads back to the same double; "inf", "-inf", "nan" otherwise.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

// *******************************************************
// JSON
// *******************************************************

namespace detail {

inline Matrix json_matrix(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array()) throw IoError(what + " must be an array of rows");
    const auto rows = static_cast<Index>(j.size());
    const auto cols = rows == 0 ? Index{0} : static_cast<Index>(j.front().size());
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Index>(row.size()) != cols) throw IoError(what + " rows differ in length");
        for (Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

inline nlohmann::json matrix_json(const Matrix& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace detail

/// Reads {"n_states", "n_actions", "transitions"[a][s][s'], "rewards", "discount", "metric"}
/// plus an optional "action_rewards"[s][a]. The result is validated.
inline FiniteMetricMDP mdp_from_json(const nlohmann::json& j) {
    try {
        const auto n = j.at("n_states").get<Index>();
        const auto na = j.at("n_actions").get<Index>();
        const auto& tj = j.at("transitions");
        if (!tj.is_array() || static_cast<Index>(tj.size()) != na)
            throw IoError("transitions must hold one matrix per action");
        std::vector<Kernel> ks;
        for (Index a = 0; a < na; ++a)
            ks.push_back(detail::json_matrix(tj[static_cast<std::size_t>(a)], "transitions[" + std::to_string(a) + "]"));
        const auto rv = j.at("rewards").get<std::vector<double>>();
        Vector r = Vector::Map(rv.data(), static_cast<Index>(rv.size()));
        std::optional<Matrix> ar;
        if (j.contains("action_rewards")) ar = detail::json_matrix(j.at("action_rewards"), "action_rewards");
        FiniteMetricMDP mdp(std::move(ks), std::move(r), j.at("discount").get<double>(),
                            Metric(detail::json_matrix(j.at("metric"), "metric")), std::move(ar));
        if (mdp.n_states() != n) throw IoError("n_states does not match the transition matrices");
        require_valid(mdp);
        return mdp;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed MDP JSON: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw IoError(e.what());
    }
}

inline nlohmann::json mdp_to_json(const FiniteMetricMDP& mdp) {
    nlohmann::json j;
    j["n_states"] = mdp.n_states();
    j["n_actions"] = mdp.n_actions();
    j["transitions"] = nlohmann::json::array();
    for (const Kernel& k : mdp.transitions()) j["transitions"].push_back(detail::matrix_json(k));
    j["rewards"] = std::vector<double>(mdp.rewards().data(), mdp.rewards().data() + mdp.rewards().size());
    if (mdp.action_rewards()) j["action_rewards"] = detail::matrix_json(*mdp.action_rewards());
    j["discount"] = mdp.discount();
    j["metric"] = detail::matrix_json(mdp.metric().distances());
    return j;
}

/// Throws IoError naming the path when the file cannot be opened or parsed.
inline FiniteMetricMDP load_mdp(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open MDP file '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("cannot parse '" + path.string() + "': " + e.what());
    }
    try {
        return mdp_from_json(j);
    } catch (const IoError& e) {
        throw IoError("'" + path.string() + "': " + e.what());
    }
}

inline void save_mdp(const FiniteMetricMDP& mdp, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << mdp_to_json(mdp).dump(2) << '\n';
}

// *******************************************************
// CSV
// *******************************************************

/// Comma-separated table with a fixed header. Fields are written verbatim.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

    CsvWriter& row(std::vector<std::string> fields) {
        if (fields.size() != header_.size()) throw std::invalid_argument("CSV row width differs from header");
        rows_.push_back(std::move(fields));
        return *this;
    }

    std::string str() const {
        std::ostringstream os;
        write_line(os, header_);
        for (const auto& r : rows_) write_line(os, r);
        return os.str();
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write '" + path.string() + "'");
        out << str();
        if (!out) throw IoError("write to '" + path.string() + "' failed");
    }

    std::size_t size() const noexcept { return rows_.size(); }

private:
    static void write_line(std::ostream& os, const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) os << (i ? "," : "") << fields[i];
        os << '\n';
    }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

/// Creates `dir` if needed and checks that a file can be written inside it.
inline void ensure_writable_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec && !std::filesystem::is_directory(dir))
        throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    const auto probe = dir / ".write_probe";
    {
        std::ofstream out(probe);
        if (!out) throw IoError("output directory '" + dir.string() + "' is not writable");
    }
    std::filesystem::remove(probe, ec);
}

}  // namespace lipmbrl
