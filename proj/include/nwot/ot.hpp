#ifndef NWOT_OT_HPP
#define NWOT_OT_HPP

#include "core.hpp"
#include "detail/transport_simplex.hpp"

#include <Eigen/Dense>

#include <vector>

/**
 * @file ot.hpp
 *
 * @brief Exact discrete optimal transport.
 */

namespace nwot {

/**
 * @brief Coupling between two discrete measures, stored sparsely.
 *
 * Only positive entries are kept. A basic optimal plan has at most n + m - 1 of them.
 */
class TransportPlan {
public:
    struct Entry {
        Index row;
        Index col;
        double mass;
    };

    TransportPlan() = default;

    TransportPlan(Index rows, Index cols, std::vector<Entry> entries, Eigen::VectorXd source_marginal,
                  Eigen::VectorXd target_marginal, double objective)
        : rows_(rows),
          cols_(cols),
          entries_(std::move(entries)),
          source_marginal_(std::move(source_marginal)),
          target_marginal_(std::move(target_marginal)),
          objective_(objective) {}

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    const std::vector<Entry>& entries() const { return entries_; }
    const Eigen::VectorXd& source_marginal() const { return source_marginal_; }
    const Eigen::VectorXd& target_marginal() const { return target_marginal_; }
    double objective() const { return objective_; }

    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows_, cols_);
        for (const auto& e : entries_) {
            out(e.row, e.col) += e.mass;
        }
        return out;
    }

    Eigen::VectorXd row_sums() const {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(rows_);
        for (const auto& e : entries_) {
            out[e.row] += e.mass;
        }
        return out;
    }

    Eigen::VectorXd col_sums() const {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(cols_);
        for (const auto& e : entries_) {
            out[e.col] += e.mass;
        }
        return out;
    }

    /// Sum of mass times cost, recomputed from the given matrix.
    double cost_under(const CostMatrix& cost) const {
        if (cost.rows() != rows_ || cost.cols() != cols_) {
            throw DimensionMismatch("cost matrix shape does not match the plan");
        }
        double total = 0;
        for (const auto& e : entries_) {
            total += e.mass * cost(e.row, e.col);
        }
        return total;
    }

private:
    Index rows_ = 0;
    Index cols_ = 0;
    std::vector<Entry> entries_;
    Eigen::VectorXd source_marginal_;
    Eigen::VectorXd target_marginal_;
    double objective_ = 0;
};

/// Dual potentials with u_i + v_j <= c_ij at optimality.
struct DualPotentials {
    Eigen::VectorXd u;
    Eigen::VectorXd v;
};

struct WassersteinResult {
    /// Optimal cost. For exponent 2 this is the squared W_2, not its root.
    double value = 0;
    TransportPlan plan;
    DualPotentials dual;
};

/// Reusable simplex basis; valid across calls whose marginals and sizes are unchanged.
using WarmStart = detail::GroupedTransportBasis;

namespace detail {

inline std::vector<TransportPlan::Entry> to_entries(const std::vector<FlowEntry>& flows) {
    std::vector<TransportPlan::Entry> out;
    out.reserve(flows.size());
    for (const auto& f : flows) {
        out.push_back(TransportPlan::Entry{f.row, f.col, f.mass});
    }
    return out;
}

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

} // namespace detail

/**
 * Solves the transportation problem for an explicit cost matrix.
 *
 * @param warm Optional basis from a previous solve with the same marginals; updated on return.
 */
inline WassersteinResult wasserstein(const CostMatrix& cost, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                     WarmStart* warm = nullptr) {
    if (cost.rows() != a.size() || cost.cols() != b.size()) {
        throw DimensionMismatch("marginals do not match the cost matrix");
    }
    const std::vector<int> group(static_cast<std::size_t>(b.size()), 0);
    detail::GroupedTransportProblem problem;
    problem.supply = std::span<const double>(a.data(), static_cast<std::size_t>(a.size()));
    problem.column_weight = std::span<const double>(b.data(), static_cast<std::size_t>(b.size()));
    problem.column_group = group;
    problem.groups = 1;
    problem.cost = std::span<const double>(cost.entries().data(), static_cast<std::size_t>(cost.entries().size()));
    auto sol = detail::solve_grouped_transport(problem, warm);
    if (warm != nullptr) {
        *warm = sol.basis;
    }

    WassersteinResult out;
    out.value = sol.objective;
    out.plan = TransportPlan(a.size(), b.size(), detail::to_entries(sol.flows), a, b, sol.objective);
    out.dual.u = detail::to_vector(sol.row_potential);
    out.dual.v = detail::to_vector(sol.col_potential);
    return out;
}

/// Exact W_p^p between two discrete distributions; exponent must be 1 or 2.
inline WassersteinResult wasserstein(const DiscreteDistribution& a, const DiscreteDistribution& b, double exponent) {
    return wasserstein(cost_matrix(a, b, exponent), a.weights(), b.weights());
}

inline double wasserstein_value(const DiscreteDistribution& a, const DiscreteDistribution& b, double exponent) {
    return wasserstein(a, b, exponent).value;
}

/// Dual gap and worst constraint violation of a potential pair.
struct CertificateCheck {
    double gap = 0;
    double max_violation = 0;
};

inline CertificateCheck check_certificate(const CostMatrix& cost, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                          const DualPotentials& dual, double primal_objective) {
    CertificateCheck out;
    for (Index i = 0; i < cost.rows(); ++i) {
        for (Index j = 0; j < cost.cols(); ++j) {
            out.max_violation = std::max(out.max_violation, dual.u[i] + dual.v[j] - cost(i, j));
        }
    }
    out.gap = std::abs(a.dot(dual.u) + b.dot(dual.v) - primal_objective);
    return out;
}

} // namespace nwot

#endif
