#ifndef NWOT_CLUSTERING_HPP
#define NWOT_CLUSTERING_HPP

#include "core.hpp"
#include "fitting.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

/**
 * @file clustering.hpp
 *
 * @brief Assigns points to the nearest fitted component and scores the labels
 * against ground truth with purity, NMI and ARI.
 */

namespace nwot {

struct ClusterAssignment {
    std::vector<int> labels;
    /// Squared distance to the closest support point of the chosen component.
    std::vector<double> distances;
};

struct ClusterScores {
    double purity = 0;
    double nmi = 0;
    double ari = 0;
};

/// Label of x_i: the component with the closest support point (ties toward the lower index).
inline ClusterAssignment assign(const DiscreteDistribution& x, const MixtureModel& model) {
    if (x.dim() != model.dim()) {
        throw DimensionMismatch("data and model have different dimensions");
    }
    ClusterAssignment out;
    out.labels.resize(static_cast<std::size_t>(x.size()));
    out.distances.resize(static_cast<std::size_t>(x.size()));
    for (Index i = 0; i < x.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        int label = 0;
        for (Index c = 0; c < model.k(); ++c) {
            const auto& support = model.components()[static_cast<std::size_t>(c)].support();
            const double d = (support.rowwise() - x.point(i)).rowwise().squaredNorm().minCoeff();
            if (d < best) {
                best = d;
                label = static_cast<int>(c);
            }
        }
        out.labels[static_cast<std::size_t>(i)] = label;
        out.distances[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

namespace detail {

inline double choose2(double n) { return n * (n - 1.0) / 2.0; }

inline double entropy(const std::map<int, double>& counts, double n) {
    double h = 0;
    for (const auto& [label, c] : counts) {
        if (c > 0) {
            h -= (c / n) * std::log(c / n);
        }
    }
    return h;
}

} // namespace detail

inline ClusterScores score(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size()) {
        throw DimensionMismatch("predicted and true labels have different lengths");
    }
    if (pred.empty()) {
        throw InvalidArgument("cannot score an empty labelling");
    }
    const double n = static_cast<double>(pred.size());
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> rows, cols;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        joint[{pred[i], truth[i]}] += 1;
        rows[pred[i]] += 1;
        cols[truth[i]] += 1;
    }

    ClusterScores out;
    std::map<int, double> majority;
    for (const auto& [key, c] : joint) {
        majority[key.first] = std::max(majority[key.first], c);
    }
    for (const auto& [label, c] : majority) {
        out.purity += c;
    }
    out.purity /= n;

    double mi = 0;
    for (const auto& [key, c] : joint) {
        mi += (c / n) * std::log(c * n / (rows[key.first] * cols[key.second]));
    }
    const double hp = detail::entropy(rows, n);
    const double ht = detail::entropy(cols, n);
    const double mean_h = 0.5 * (hp + ht);
    // both labellings constant: identical partitions
    out.nmi = mean_h > 0 ? std::clamp(mi / mean_h, 0.0, 1.0) : 1.0;

    double index = 0, sum_rows = 0, sum_cols = 0;
    for (const auto& [key, c] : joint) {
        index += detail::choose2(c);
    }
    for (const auto& [label, c] : rows) {
        sum_rows += detail::choose2(c);
    }
    for (const auto& [label, c] : cols) {
        sum_cols += detail::choose2(c);
    }
    if (n < 2) {
        out.ari = 1.0;
        return out;
    }
    const double expected = sum_rows * sum_cols / detail::choose2(n);
    const double max_index = 0.5 * (sum_rows + sum_cols);
    out.ari = max_index == expected ? 1.0 : (index - expected) / (max_index - expected);
    return out;
}

inline ClusterScores score(const ClusterAssignment& pred, const std::vector<int>& truth) { return score(pred.labels, truth); }

} // namespace nwot

#endif
