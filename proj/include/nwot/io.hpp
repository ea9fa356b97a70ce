#ifndef NWOT_IO_HPP
#define NWOT_IO_HPP

#include "applications.hpp"
#include "clustering.hpp"
#include "core.hpp"
#include "fitting.hpp"
#include "mode_count.hpp"
#include "nw.hpp"
#include "ot.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

/**
 * @file io.hpp
 *
 * @brief Points CSV files and JSON reports.
 *
 * Points CSV: a header naming x0..x{d-1}, optionally `label` (integer) and
 * `weight`; one point per row. Reports: a JSON object with `command`, `config`,
 * `results`, `version` and `timestamp`. Every file is written to a temporary
 * sibling and renamed into place.
 */

namespace nwot {

inline constexpr const char* kVersion = "0.1.0";

using json = nlohmann::ordered_json;

class IoError : public Error {
public:
    using Error::Error;
};

struct PointsFile {
    DiscreteDistribution data;
    std::optional<std::vector<int>> labels;
    /// Set when the stored weights had to be renormalised by more than 1e-6.
    std::optional<std::string> warning;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

inline double parse_real(const std::string& s, std::size_t line) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(v)) {
        throw IoError("line " + std::to_string(line) + ": not a finite number: '" + s + "'");
    }
    return v;
}

inline int parse_int(const std::string& s, std::size_t line) {
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size() || v < 0 || v > 1000000) {
        throw IoError("line " + std::to_string(line) + ": not a valid label: '" + s + "'");
    }
    return static_cast<int>(v);
}

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

/// Writes `content` to `path` through a temporary file in the same directory and a rename.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open " + tmp.string() + " for writing");
        }
        out << content;
        out.flush();
        if (!out) {
            throw IoError("failed writing " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move file into place: " + path.string());
    }
}

inline PointsFile parse_points_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") != std::string::npos) {
            header = detail::split_csv_line(line);
            break;
        }
    }
    if (header.empty()) {
        throw InvalidArgument("empty dataset");
    }
    Index dim = 0;
    int label_col = -1, weight_col = -1;
    std::vector<int> coord_col;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const auto& h = header[c];
        if (h == "label") {
            if (label_col >= 0) {
                throw IoError("duplicate label column");
            }
            label_col = static_cast<int>(c);
        } else if (h == "weight") {
            if (weight_col >= 0) {
                throw IoError("duplicate weight column");
            }
            weight_col = static_cast<int>(c);
        } else if (h.size() > 1 && h[0] == 'x' && h.find_first_not_of("0123456789", 1) == std::string::npos) {
            const auto idx = static_cast<std::size_t>(std::stoul(h.substr(1)));
            if (coord_col.size() <= idx) {
                coord_col.resize(idx + 1, -1);
            }
            if (coord_col[idx] >= 0) {
                throw IoError("duplicate column " + h);
            }
            coord_col[idx] = static_cast<int>(c);
        } else {
            throw IoError("unknown column '" + h + "'");
        }
    }
    for (std::size_t i = 0; i < coord_col.size(); ++i) {
        if (coord_col[i] < 0) {
            throw IoError("missing column x" + std::to_string(i));
        }
    }
    dim = static_cast<Index>(coord_col.size());
    if (dim == 0) {
        throw IoError("no coordinate columns (expected x0, x1, ...)");
    }

    std::vector<double> coords, weights;
    std::vector<int> labels;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw IoError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) + " fields, got " +
                          std::to_string(cells.size()));
        }
        for (int c : coord_col) {
            coords.push_back(detail::parse_real(cells[static_cast<std::size_t>(c)], line_no));
        }
        if (label_col >= 0) {
            labels.push_back(detail::parse_int(cells[static_cast<std::size_t>(label_col)], line_no));
        }
        if (weight_col >= 0) {
            const double w = detail::parse_real(cells[static_cast<std::size_t>(weight_col)], line_no);
            if (w < 0) {
                throw IoError("line " + std::to_string(line_no) + ": negative weight");
            }
            weights.push_back(w);
        }
    }
    const Index n = static_cast<Index>(coords.size()) / dim;
    if (n == 0) {
        throw InvalidArgument("empty dataset");
    }
    PointMatrix pts = Eigen::Map<const PointMatrix>(coords.data(), n, dim);
    PointsFile out;
    if (weight_col >= 0) {
        Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(weights.data(), n);
        const double total = w.sum();
        if (!(total > 0)) {
            throw IoError("weights sum to zero");
        }
        if (std::abs(total - 1.0) > 1e-6) {
            out.warning = "weights summed to " + detail::format_real(total) + "; renormalised";
        }
        out.data = DiscreteDistribution(std::move(pts), w / total);
    } else {
        out.data = DiscreteDistribution::uniform(std::move(pts));
    }
    if (label_col >= 0) {
        out.labels = std::move(labels);
    }
    return out;
}

inline PointsFile read_points_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return parse_points_csv(in);
}

inline std::string points_csv(const DiscreteDistribution& data, const std::vector<int>* labels = nullptr,
                              bool with_weights = false) {
    if (labels != nullptr && static_cast<Index>(labels->size()) != data.size()) {
        throw DimensionMismatch("labels do not match the data size");
    }
    std::ostringstream out;
    for (Index c = 0; c < data.dim(); ++c) {
        out << (c ? "," : "") << 'x' << c;
    }
    if (labels != nullptr) {
        out << ",label";
    }
    if (with_weights) {
        out << ",weight";
    }
    out << '\n';
    for (Index i = 0; i < data.size(); ++i) {
        for (Index c = 0; c < data.dim(); ++c) {
            out << (c ? "," : "") << detail::format_real(data.points()(i, c));
        }
        if (labels != nullptr) {
            out << ',' << (*labels)[static_cast<std::size_t>(i)];
        }
        if (with_weights) {
            out << ',' << detail::format_real(data.weights()[i]);
        }
        out << '\n';
    }
    return out.str();
}

inline void write_points_csv(const std::filesystem::path& path, const DiscreteDistribution& data,
                             const std::vector<int>* labels = nullptr, bool with_weights = false) {
    write_atomic(path, points_csv(data, labels, with_weights));
}

inline std::string plan_csv(const TransportPlan& plan) {
    std::ostringstream out;
    out << "row,col,mass\n";
    for (const auto& e : plan.entries()) {
        out << e.row << ',' << e.col << ',' << detail::format_real(e.mass) << '\n';
    }
    return out.str();
}

// ---- JSON conversion ----

inline json to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) {
        out.push_back(v[i]);
    }
    return out;
}

inline json to_json(const SimplexVector& v) { return to_json(v.values()); }

inline json to_json(const PointMatrix& m) {
    json out = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(i, c));
        }
        out.push_back(std::move(row));
    }
    return out;
}

inline json to_json(const TransportPlan& plan) {
    json entries = json::array();
    for (const auto& e : plan.entries()) {
        entries.push_back(json::array({e.row, e.col, e.mass}));
    }
    return json{{"rows", plan.rows()}, {"cols", plan.cols()}, {"objective", plan.objective()}, {"entries", std::move(entries)}};
}

inline json to_json(const MixtureComponent& c) {
    return json{{"support", to_json(c.support())}, {"weights", to_json(c.weights())}};
}

inline json to_json(const std::vector<MixtureComponent>& comps) {
    json out = json::array();
    for (const auto& c : comps) {
        out.push_back(to_json(c));
    }
    return out;
}

inline bool non_increasing(const std::vector<double>& trace, double tol = 1e-9) {
    for (std::size_t i = 1; i < trace.size(); ++i) {
        if (trace[i] > trace[i - 1] + tol) {
            return false;
        }
    }
    return true;
}

inline json to_json(const NwResult& r, bool include_plans = true) {
    json out{{"value", r.value},       {"pi1", to_json(r.pi1)},  {"pi2", to_json(r.pi2)},
             {"trace", r.trace},       {"trace_non_increasing", non_increasing(r.trace)},
             {"converged", r.converged}, {"restart", r.restart}, {"components", to_json(r.components)}};
    if (include_plans) {
        out["plan1"] = to_json(r.plan1);
        out["plan2"] = to_json(r.plan2);
    }
    return out;
}

inline json to_json(const FitResult& r) {
    return json{{"objective", r.objective},
                {"regularizer_value", r.regularizer_value},
                {"pi", to_json(r.model.proportions())},
                {"trace", r.trace},
                {"trace_non_increasing", non_increasing(r.trace)},
                {"converged", r.converged},
                {"restart", r.restart},
                {"components", to_json(r.model.components())}};
}

inline json to_json(const ModeRecovery& m) {
    json matching = json::array();
    for (int j : m.matching) {
        matching.push_back(j);
    }
    return json{{"pi_error", m.pi_error},       {"matched_pi", to_json(m.matched_pi)},
                {"matching", matching},         {"mean_error", m.mean_error},
                {"covariance_error", m.covariance_error}, {"missing_modes", m.missing_modes}};
}

inline json to_json(const ClusterScores& s) { return json{{"purity", s.purity}, {"nmi", s.nmi}, {"ari", s.ari}}; }

inline json nan_as_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const ModeSweepReport& r) {
    json diffs = json::array();
    for (double d : r.first_diffs) {
        diffs.push_back(nan_as_null(d));
    }
    json pis = json::array();
    for (const auto& res : r.results) {
        pis.push_back(json{{"k", res.pi1.size()}, {"pi1", to_json(res.pi1)}, {"pi2", to_json(res.pi2)}, {"converged", res.converged}});
    }
    return json{{"ks", r.ks},
                {"nw_values", r.nw_values},
                {"first_diffs", diffs},
                {"selected_k", r.selected_k},
                {"heuristic_selection", r.heuristic},
                {"wasserstein", r.wasserstein},
                {"small_threshold", r.small_threshold},
                {"gap_threshold", nan_as_null(r.gap_threshold)},
                {"gap_fraction", r.gap_fraction},
                {"monotonicity_violations", r.monotonicity_violations},
                {"per_k", pis}};
}

inline json to_json(const ComparativeVerdict& v) {
    return json{{"wasserstein", v.wasserstein},
                {"nw", v.nw},
                {"ratio", v.ratio},
                {"verdict", to_string(v.verdict)},
                {"thresholds", json{{"low_w", v.low_w}, {"low_ratio", v.low_ratio}}},
                {"pi1", to_json(v.nw_result.pi1)},
                {"pi2", to_json(v.nw_result.pi2)}};
}

inline json to_json(const DaReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return json{{"estimated_pi", to_json(r.estimated_pi)},
                {"objective", r.objective},
                {"baseline_objective", r.baseline_objective},
                {"cross_mode_mass", opt(r.cross_mode_mass)},
                {"baseline_cross_mode_mass", opt(r.baseline_cross_mode_mass)}};
}

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline json make_report(const std::string& command, json config, json results) {
    return json{{"command", command},
                {"config", std::move(config)},
                {"results", std::move(results)},
                {"version", kVersion},
                {"timestamp", utc_timestamp()}};
}

inline void write_report(const std::filesystem::path& path, const json& report) { write_atomic(path, report.dump(2) + "\n"); }

inline json read_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw IoError("malformed report: " + std::string(e.what()));
    }
}

/**
 * Re-checks the invariants embedded in a report: every proportion vector is a
 * simplex, and every trace flagged non-increasing is. Returns the problems found.
 */
inline std::vector<std::string> validate_report(const json& report) {
    std::vector<std::string> problems;
    for (const char* key : {"command", "config", "results", "version"}) {
        if (!report.contains(key)) {
            problems.push_back(std::string("missing field ") + key);
        }
    }
    auto walk = [&](auto&& self, const json& node, const std::string& where) -> void {
        if (node.is_object()) {
            for (const auto& [key, value] : node.items()) {
                const std::string here = where + "/" + key;
                if ((key == "pi" || key == "pi1" || key == "pi2" || key == "estimated_pi") && value.is_array()) {
                    std::vector<double> v;
                    try {
                        v = value.template get<std::vector<double>>();
                        Eigen::VectorXd e = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
                        SimplexVector check(e);
                    } catch (const std::exception& ex) {
                        problems.push_back(here + ": " + ex.what());
                    }
                }
                if (key == "trace" && value.is_array() && node.contains("trace_non_increasing")) {
                    const bool flagged = node["trace_non_increasing"].template get<bool>();
                    const bool actual = non_increasing(value.template get<std::vector<double>>());
                    if (flagged != actual) {
                        problems.push_back(here + ": monotonicity flag does not match the trace");
                    }
                }
                self(self, value, here);
            }
        } else if (node.is_array()) {
            for (std::size_t i = 0; i < node.size(); ++i) {
                self(self, node[i], where + "/" + std::to_string(i));
            }
        }
    };
    if (report.contains("results")) {
        walk(walk, report["results"], "results");
    }
    return problems;
}

} // namespace nwot

#endif
