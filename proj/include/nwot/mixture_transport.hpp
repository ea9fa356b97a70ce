#ifndef NWOT_MIXTURE_TRANSPORT_HPP
#define NWOT_MIXTURE_TRANSPORT_HPP

#include "core.hpp"
#include "ot.hpp"

#include <Eigen/Dense>

#include <vector>

/**
 * @file mixture_transport.hpp
 *
 * @brief Transport from a distribution to a mixture whose proportions are free.
 *
 * For fixed components, the column constraint "support point j of component c
 * receives pi_c times its weight" is linear in (plan, pi), so
 * min over pi of W(x, P_{G,pi}) is one linear program.
 */

namespace nwot {

/// All component supports stacked row-wise; column j belongs to group[j].
struct StackedComponents {
    PointMatrix points;
    Eigen::VectorXd weights;
    std::vector<int> group;
    std::vector<Index> offset;  ///< First stacked row of each component, plus a final end marker.

    Index k() const { return static_cast<Index>(offset.size()) - 1; }
    Index size() const { return points.rows(); }

    static StackedComponents from(const std::vector<MixtureComponent>& components) {
        if (components.empty()) {
            throw InvalidArgument("component list is empty");
        }
        const Index dim = components.front().dim();
        Index total = 0;
        for (const auto& c : components) {
            if (c.dim() != dim) {
                throw DimensionMismatch("components have different dimensions");
            }
            total += c.size();
        }
        StackedComponents out;
        out.points.resize(total, dim);
        out.weights.resize(total);
        out.group.reserve(static_cast<std::size_t>(total));
        Index row = 0;
        for (std::size_t c = 0; c < components.size(); ++c) {
            out.offset.push_back(row);
            const auto& comp = components[c];
            out.points.middleRows(row, comp.size()) = comp.support();
            out.weights.segment(row, comp.size()) = comp.weights().values();
            out.group.insert(out.group.end(), static_cast<std::size_t>(comp.size()), static_cast<int>(c));
            row += comp.size();
        }
        out.offset.push_back(row);
        return out;
    }
};

struct MixtureTransport {
    /// Optimal W_p^p(x, P_{G,pi}) over pi.
    double value = 0;
    SimplexVector proportions;
    /// Rows index x, columns index the stacked supports.
    TransportPlan plan;
    DualPotentials dual;
};

namespace detail {

inline SimplexVector clean_simplex(const std::vector<double>& raw) {
    Eigen::VectorXd v(static_cast<Index>(raw.size()));
    for (std::size_t i = 0; i < raw.size(); ++i) {
        v[static_cast<Index>(i)] = std::max(0.0, raw[i]);
    }
    const double total = v.sum();
    if (!(total > 0)) {
        throw SolverError("solver returned an empty proportion vector");
    }
    // removes floating-point round-off only; the solver keeps sum(pi) = 1 exactly in exact arithmetic
    return SimplexVector(v / total);
}

} // namespace detail

/**
 * Solves min over (plan, pi) of the transport cost between x and the mixture with
 * the given stacked components.
 *
 * @param cost Cost between x's points (rows) and the stacked supports (columns).
 * @param floor Lower bound on every proportion; k * floor must not exceed 1.
 * @param warm Optional basis from a previous call with the same x and components layout; updated.
 */
inline MixtureTransport mixture_transport(const Eigen::VectorXd& x_weights, const StackedComponents& comps,
                                          const CostMatrix& cost, double floor = 0.0, WarmStart* warm = nullptr) {
    if (cost.rows() != x_weights.size() || cost.cols() != comps.size()) {
        throw DimensionMismatch("cost matrix does not match the distribution and components");
    }
    const Index k = comps.k();
    if (!(floor >= 0) || floor * static_cast<double>(k) > 1.0 + kWeightTolerance) {
        throw InvalidArgument("proportion floor must satisfy 0 <= k * floor <= 1");
    }
    std::vector<double> fixed;
    if (floor > 0) {
        fixed.resize(static_cast<std::size_t>(comps.size()));
        for (Index j = 0; j < comps.size(); ++j) {
            fixed[static_cast<std::size_t>(j)] = floor * comps.weights[j];
        }
    }
    detail::GroupedTransportProblem problem;
    problem.supply = std::span<const double>(x_weights.data(), static_cast<std::size_t>(x_weights.size()));
    problem.column_weight = std::span<const double>(comps.weights.data(), static_cast<std::size_t>(comps.weights.size()));
    problem.column_group = comps.group;
    problem.groups = static_cast<int>(k);
    problem.cost = std::span<const double>(cost.entries().data(), static_cast<std::size_t>(cost.entries().size()));
    problem.fixed_demand = fixed;
    auto sol = detail::solve_grouped_transport(problem, warm);
    if (warm != nullptr) {
        *warm = sol.basis;
    }

    std::vector<double> pis = sol.proportions;
    for (auto& p : pis) {
        p += floor;
    }
    MixtureTransport out;
    out.value = sol.objective;
    out.proportions = detail::clean_simplex(pis);
    Eigen::VectorXd target(comps.size());
    for (Index j = 0; j < comps.size(); ++j) {
        target[j] = out.proportions[comps.group[static_cast<std::size_t>(j)]] * comps.weights[j];
    }
    out.plan = TransportPlan(x_weights.size(), comps.size(), detail::to_entries(sol.flows), x_weights, target, sol.objective);
    out.dual.u = detail::to_vector(sol.row_potential);
    out.dual.v = detail::to_vector(sol.col_potential);
    return out;
}

inline MixtureTransport mixture_transport(const DiscreteDistribution& x, const std::vector<MixtureComponent>& components,
                                          double exponent, double floor = 0.0) {
    const auto comps = StackedComponents::from(components);
    if (comps.points.cols() != x.dim()) {
        throw DimensionMismatch("components and distribution have different dimensions");
    }
    return mixture_transport(x.weights(), comps, cost_matrix(x.points(), comps.points, exponent), floor);
}

} // namespace nwot

#endif
