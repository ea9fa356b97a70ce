#ifndef NWOT_OT_BRUTEFORCE_HPP
#define NWOT_OT_BRUTEFORCE_HPP

#include "core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

/**
 * @file ot_bruteforce.hpp
 *
 * @brief Enumeration oracle for tiny transport problems.
 *
 * Weights must be multiples of 1/N for some N <= 8. Each point is split into unit
 * atoms of mass 1/N; the transportation polytope with integral marginals has
 * integral vertices, so the optimum is attained by a permutation of atoms and
 * all N! of them are enumerated.
 */

namespace nwot {

inline constexpr int kBruteforceMaxAtoms = 8;

namespace detail {

inline std::optional<std::vector<int>> atom_counts(const Eigen::VectorXd& w, int denominator) {
    std::vector<int> counts;
    counts.reserve(static_cast<std::size_t>(w.size()));
    for (Index i = 0; i < w.size(); ++i) {
        const double scaled = w[i] * denominator;
        const double rounded = std::round(scaled);
        if (std::abs(scaled - rounded) > 1e-9 * denominator) {
            return std::nullopt;
        }
        counts.push_back(static_cast<int>(rounded));
    }
    if (std::accumulate(counts.begin(), counts.end(), 0) != denominator) {
        return std::nullopt;
    }
    return counts;
}

} // namespace detail

inline double wasserstein_bruteforce(const DiscreteDistribution& a, const DiscreteDistribution& b, double exponent) {
    if (a.dim() != b.dim()) {
        throw DimensionMismatch("distributions have different dimensions");
    }
    detail::check_exponent(exponent);
    if (a.size() > kBruteforceMaxAtoms || b.size() > kBruteforceMaxAtoms) {
        throw InvalidArgument("instance too large for brute force");
    }
    for (int n = 1; n <= kBruteforceMaxAtoms; ++n) {
        auto ca = detail::atom_counts(a.weights(), n);
        auto cb = detail::atom_counts(b.weights(), n);
        if (!ca || !cb) {
            continue;
        }
        std::vector<Index> row_of, col_of;
        for (std::size_t i = 0; i < ca->size(); ++i) {
            row_of.insert(row_of.end(), static_cast<std::size_t>((*ca)[i]), static_cast<Index>(i));
        }
        for (std::size_t j = 0; j < cb->size(); ++j) {
            col_of.insert(col_of.end(), static_cast<std::size_t>((*cb)[j]), static_cast<Index>(j));
        }
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        double best = std::numeric_limits<double>::infinity();
        do {
            double total = 0;
            for (int t = 0; t < n; ++t) {
                const Index i = row_of[static_cast<std::size_t>(t)];
                const Index j = col_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(t)])];
                total += detail::ground_cost(a.points().row(i).data(), b.points().row(j).data(), a.dim(), exponent);
            }
            best = std::min(best, total);
        } while (std::next_permutation(perm.begin(), perm.end()));
        return best / n;
    }
    throw InvalidArgument("instance too large for brute force: weights need a denominator above 8");
}

} // namespace nwot

#endif
