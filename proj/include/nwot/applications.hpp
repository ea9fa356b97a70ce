#ifndef NWOT_APPLICATIONS_HPP
#define NWOT_APPLICATIONS_HPP

#include "core.hpp"
#include "mixture_transport.hpp"
#include "nw.hpp"
#include "ot.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

/**
 * @file applications.hpp
 *
 * @brief Two uses of the proportion-free transport:
 *
 * - comparative_test: combines W and NW to tell "same distribution", "same
 *   components in different proportions" and "different components" apart.
 * - da_reweight: source classes as fixed components with learned weights,
 *   transported onto a target; compared with plain transport from the pooled source.
 */

namespace nwot {

enum class Verdict { same, same_components_different_proportions, different_components };

inline std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::same:
        return "SAME";
    case Verdict::same_components_different_proportions:
        return "SAME_COMPONENTS_DIFFERENT_PROPORTIONS";
    case Verdict::different_components:
        return "DIFFERENT_COMPONENTS";
    }
    return "";
}

/// Process exit status encoding a verdict.
inline int exit_code(Verdict v) {
    switch (v) {
    case Verdict::same:
        return 10;
    case Verdict::same_components_different_proportions:
        return 11;
    case Verdict::different_components:
        return 12;
    }
    return 1;
}

struct ComparativeVerdict {
    double wasserstein = 0;
    double nw = 0;
    double ratio = 0;
    Verdict verdict = Verdict::same;
    double low_w = 0;
    double low_ratio = 0;
    NwResult nw_result;
};

inline constexpr double kDefaultLowRatio = 0.2;
inline constexpr double kDefaultLowWFraction = 0.05;

/// Largest distance between any two points of x and y together.
inline double pooled_diameter(const DiscreteDistribution& x, const DiscreteDistribution& y) {
    const PointMatrix pts = stack_points({&x.points(), &y.points()});
    double best = 0;
    for (Index i = 0; i < pts.rows(); ++i) {
        best = std::max(best, (pts.bottomRows(pts.rows() - i).rowwise() - pts.row(i)).rowwise().squaredNorm().maxCoeff());
    }
    return std::sqrt(best);
}

/// Default low_w: (5% of the pooled diameter) raised to the ground-cost exponent.
inline double default_low_w(const DiscreteDistribution& x, const DiscreteDistribution& y, double exponent) {
    return std::pow(kDefaultLowWFraction * pooled_diameter(x, y), exponent);
}

inline Verdict decide(double w, double nw, double low_w, double low_ratio) {
    if (w < low_w) {
        return Verdict::same;
    }
    return nw / w < low_ratio ? Verdict::same_components_different_proportions : Verdict::different_components;
}

inline ComparativeVerdict comparative_test(const DiscreteDistribution& x, const DiscreteDistribution& y, const NwConfig& cfg,
                                           double low_w, double low_ratio) {
    if (!(low_w > 0) || !(low_ratio > 0)) {
        throw InvalidArgument("low_w and low_ratio must be positive");
    }
    ComparativeVerdict out;
    out.low_w = low_w;
    out.low_ratio = low_ratio;
    out.wasserstein = wasserstein_value(x, y, cfg.exponent);
    out.nw_result = nw_measure(x, y, cfg);
    out.nw = out.nw_result.value;
    out.ratio = out.wasserstein > 0 ? out.nw / out.wasserstein : 0.0;
    out.verdict = decide(out.wasserstein, out.nw, low_w, low_ratio);
    return out;
}

inline ComparativeVerdict comparative_test(const DiscreteDistribution& x, const DiscreteDistribution& y, const NwConfig& cfg) {
    return comparative_test(x, y, cfg, default_low_w(x, y, cfg.exponent), kDefaultLowRatio);
}

struct DaReport {
    SimplexVector estimated_pi;
    /// Optimal cost of the reweighted source against the target.
    double objective = 0;
    /// Cost of plain transport from the pooled source.
    double baseline_objective = 0;
    /// Plan mass joining a source class to a target point of another label; present when target labels are given.
    std::optional<double> cross_mode_mass;
    std::optional<double> baseline_cross_mode_mass;
};

namespace detail {

inline double cross_mass(const TransportPlan& plan, const std::vector<int>& target_labels, const std::vector<int>& column_class) {
    double total = 0;
    // rows are target points, columns are source points
    for (const auto& e : plan.entries()) {
        if (target_labels[static_cast<std::size_t>(e.row)] != column_class[static_cast<std::size_t>(e.col)]) {
            total += e.mass;
        }
    }
    return total;
}

} // namespace detail

/**
 * Learns class weights pi so that sum_c pi_c S_c is closest to the target, with
 * every class-conditional source distribution S_c held fixed.
 *
 * @param target_labels Optional ground-truth class of every target point; enables the cross-mode masses.
 */
inline DaReport da_reweight(const std::vector<DiscreteDistribution>& source_by_class, const DiscreteDistribution& target,
                            double exponent, const std::optional<std::vector<int>>& target_labels = std::nullopt) {
    if (source_by_class.size() < 2) {
        throw InvalidArgument("need at least two source classes");
    }
    std::vector<MixtureComponent> components;
    Index total = 0;
    for (const auto& s : source_by_class) {
        if (s.size() == 0) {
            throw InvalidArgument("empty source class");
        }
        if (s.dim() != target.dim()) {
            throw DimensionMismatch("source and target have different dimensions");
        }
        components.push_back(MixtureComponent::from_distribution(s));
        total += s.size();
    }
    if (target_labels && static_cast<Index>(target_labels->size()) != target.size()) {
        throw DimensionMismatch("target labels do not match the target size");
    }
    const auto stacked = StackedComponents::from(components);
    const auto cost = cost_matrix(target.points(), stacked.points, exponent);
    const auto fitted = mixture_transport(target.weights(), stacked, cost);

    // pooled source: every class weighted by its share of the samples
    Eigen::VectorXd pooled(stacked.size());
    for (std::size_t c = 0; c < source_by_class.size(); ++c) {
        const double share = static_cast<double>(source_by_class[c].size()) / static_cast<double>(total);
        pooled.segment(stacked.offset[c], source_by_class[c].size()) = share * source_by_class[c].weights();
    }
    pooled /= pooled.sum();
    const auto baseline = wasserstein(cost, target.weights(), pooled);

    DaReport out;
    out.estimated_pi = fitted.proportions;
    out.objective = fitted.value;
    out.baseline_objective = baseline.value;
    if (target_labels) {
        out.cross_mode_mass = detail::cross_mass(fitted.plan, *target_labels, stacked.group);
        out.baseline_cross_mode_mass = detail::cross_mass(baseline.plan, *target_labels, stacked.group);
    }
    return out;
}

/// Splits a labelled sample into per-class distributions (labels 0..k-1, uniform weights renormalised per class).
inline std::vector<DiscreteDistribution> split_by_label(const DiscreteDistribution& data, const std::vector<int>& labels) {
    if (static_cast<Index>(labels.size()) != data.size()) {
        throw DimensionMismatch("labels do not match the data size");
    }
    if (labels.empty()) {
        throw InvalidArgument("empty dataset");
    }
    const int k = *std::max_element(labels.begin(), labels.end()) + 1;
    if (*std::min_element(labels.begin(), labels.end()) < 0) {
        throw InvalidArgument("labels must be nonnegative");
    }
    std::vector<DiscreteDistribution> out;
    for (int c = 0; c < k; ++c) {
        std::vector<Index> rows;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == c) {
                rows.push_back(static_cast<Index>(i));
            }
        }
        if (rows.empty()) {
            throw InvalidArgument("empty class " + std::to_string(c));
        }
        PointMatrix pts(static_cast<Index>(rows.size()), data.dim());
        Eigen::VectorXd w(static_cast<Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            pts.row(static_cast<Index>(r)) = data.point(rows[r]);
            w[static_cast<Index>(r)] = data.weights()[rows[r]];
        }
        if (!(w.sum() > 0)) {
            w.setConstant(1.0);
        }
        out.emplace_back(std::move(pts), w / w.sum());
    }
    return out;
}

} // namespace nwot

#endif
