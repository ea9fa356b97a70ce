#ifndef NWOT_COMPONENTS_HPP
#define NWOT_COMPONENTS_HPP

#include "core.hpp"
#include "mixture_transport.hpp"
#include "ot.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

/**
 * @file components.hpp
 *
 * @brief Component families and the block-coordinate support updates shared by
 * the NW solver, mixture fitting and the mode-count sweep.
 *
 * Every component carries m support points with uniform weights. Two families:
 *
 * - free_support: the m points move independently.
 * - affine: support point j of component c is b_c + A_c z_j for a latent set
 *   {z_j} shared by all components, whitened to zero mean and identity covariance.
 *   This is the discrete analogue of an affine generator applied to a normal
 *   latent; a component cannot split itself across two distant modes.
 *
 * All updates are performed with the transport plans held fixed and never
 * increase the transport cost under those plans.
 */

namespace nwot {

enum class ComponentFamily { free_support, affine };

inline std::string to_string(ComponentFamily f) { return f == ComponentFamily::affine ? "affine" : "free"; }

inline ComponentFamily parse_family(const std::string& name) {
    if (name == "free" || name == "free_support") {
        return ComponentFamily::free_support;
    }
    if (name == "affine") {
        return ComponentFamily::affine;
    }
    throw InvalidArgument("unknown component family: " + name);
}

namespace detail {

/// Sparse transport coupling between data rows and stacked support columns.
struct Coupling {
    const PointMatrix* data;
    const TransportPlan* plan;
};

/// Per-column view of one or more couplings: for column j, the (data row, mass) pairs.
struct ColumnMasses {
    struct Item {
        const double* x;
        double mass;
    };
    std::vector<Index> start;
    std::vector<Item> items;

    ColumnMasses(const std::vector<Coupling>& couplings, Index columns) {
        start.assign(static_cast<std::size_t>(columns) + 1, 0);
        for (const auto& c : couplings) {
            for (const auto& e : c.plan->entries()) {
                ++start[static_cast<std::size_t>(e.col) + 1];
            }
        }
        std::partial_sum(start.begin(), start.end(), start.begin());
        items.resize(static_cast<std::size_t>(start.back()));
        std::vector<Index> fill(start.begin(), start.end() - 1);
        for (const auto& c : couplings) {
            for (const auto& e : c.plan->entries()) {
                items[static_cast<std::size_t>(fill[static_cast<std::size_t>(e.col)]++)] = Item{c.data->row(e.row).data(), e.mass};
            }
        }
    }

    double mass(Index j) const {
        double total = 0;
        for (Index t = start[static_cast<std::size_t>(j)]; t < start[static_cast<std::size_t>(j) + 1]; ++t) {
            total += items[static_cast<std::size_t>(t)].mass;
        }
        return total;
    }

    /// Sum of mass * ground cost between column j's couplings and location s.
    double cost(Index j, const double* s, Index dim, double exponent) const {
        double total = 0;
        for (Index t = start[static_cast<std::size_t>(j)]; t < start[static_cast<std::size_t>(j) + 1]; ++t) {
            const auto& it = items[static_cast<std::size_t>(t)];
            total += it.mass * ground_cost(it.x, s, dim, exponent);
        }
        return total;
    }
};

/// Latent sample of m points in R^d, centred and whitened when m > d.
inline PointMatrix whitened_latent(Index m, Index dim, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    PointMatrix z(m, dim);
    for (Index i = 0; i < m; ++i) {
        for (Index c = 0; c < dim; ++c) {
            z(i, c) = normal(rng);
        }
    }
    z.rowwise() -= z.colwise().mean();
    if (m > dim) {
        const Eigen::MatrixXd cov = (z.transpose() * z) / static_cast<double>(m);
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() == Eigen::Success) {
            // z <- z L^{-T}, so that the sample covariance becomes the identity
            const Eigen::MatrixXd linv = llt.matrixL().solve(Eigen::MatrixXd::Identity(dim, dim));
            z = z * linv.transpose();
        }
    }
    return z;
}

/// Cholesky-like factor of a covariance, tolerant of rank deficiency.
inline Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
}

inline Eigen::VectorXd weighted_mean(const PointMatrix& pts, const std::vector<Index>& rows, const Eigen::VectorXd& w) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(pts.cols());
    double total = 0;
    for (Index r : rows) {
        mean += w[r] * pts.row(r).transpose();
        total += w[r];
    }
    return total > 0 ? Eigen::VectorXd(mean / total) : mean;
}

inline Eigen::MatrixXd weighted_cov(const PointMatrix& pts, const std::vector<Index>& rows, const Eigen::VectorXd& w,
                                    const Eigen::VectorXd& mean) {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(pts.cols(), pts.cols());
    double total = 0;
    for (Index r : rows) {
        const Eigen::VectorXd d = pts.row(r).transpose() - mean;
        cov += w[r] * d * d.transpose();
        total += w[r];
    }
    return total > 0 ? Eigen::MatrixXd(cov / total) : cov;
}

/// Mutable components during alternation.
class ComponentState {
public:
    ComponentState(ComponentFamily family, Index k, Index m, Index dim, std::mt19937_64& rng)
        : family_(family), m_(m), dim_(dim), support_(static_cast<std::size_t>(k), PointMatrix::Zero(m, dim)) {
        if (family_ == ComponentFamily::affine) {
            latent_ = whitened_latent(m, dim, rng);
            offset_.assign(static_cast<std::size_t>(k), Eigen::VectorXd::Zero(dim));
            linear_.assign(static_cast<std::size_t>(k), Eigen::MatrixXd::Zero(dim, dim));
        }
    }

    ComponentFamily family() const { return family_; }
    Index k() const { return static_cast<Index>(support_.size()); }
    Index points_per_component() const { return m_; }
    Index dim() const { return dim_; }
    const PointMatrix& support(Index c) const { return support_[static_cast<std::size_t>(c)]; }

    void set_free(Index c, const PointMatrix& pts) { support_[static_cast<std::size_t>(c)] = pts; }

    void set_affine(Index c, const Eigen::VectorXd& b, const Eigen::MatrixXd& a) {
        offset_[static_cast<std::size_t>(c)] = b;
        linear_[static_cast<std::size_t>(c)] = a;
        support_[static_cast<std::size_t>(c)] = (latent_ * a.transpose()).rowwise() + b.transpose();
    }

    /// Sets component c as close as the family allows to the given support (least squares for affine).
    void fit_support(Index c, const PointMatrix& pts) {
        if (family_ != ComponentFamily::affine) {
            set_free(c, pts);
            return;
        }
        PointMatrix phi(m_, dim_ + 1);
        phi.col(0).setOnes();
        phi.rightCols(dim_) = latent_;
        const Eigen::MatrixXd theta = phi.completeOrthogonalDecomposition().solve(Eigen::MatrixXd(pts)).transpose();
        set_affine(c, theta.col(0), theta.rightCols(dim_));
    }

    /// Places component c on a set of data rows: the rows themselves, or their mean and covariance.
    void place(Index c, const PointMatrix& pool, const Eigen::VectorXd& pool_weights, const std::vector<Index>& rows,
               std::mt19937_64& rng) {
        if (rows.empty()) {
            throw SolverError("cannot place a component on an empty cell");
        }
        if (family_ == ComponentFamily::affine) {
            const Eigen::VectorXd mean = weighted_mean(pool, rows, pool_weights);
            const Eigen::MatrixXd cov = weighted_cov(pool, rows, pool_weights, mean);
            set_affine(c, mean, covariance_factor(cov));
            return;
        }
        PointMatrix pts(m_, dim_);
        std::vector<Index> pick(rows);
        if (static_cast<Index>(pick.size()) >= m_) {
            for (Index t = 0; t < m_; ++t) {
                std::uniform_int_distribution<std::size_t> u(static_cast<std::size_t>(t), pick.size() - 1);
                std::swap(pick[static_cast<std::size_t>(t)], pick[u(rng)]);
                pts.row(t) = pool.row(pick[static_cast<std::size_t>(t)]);
            }
        } else {
            std::uniform_int_distribution<std::size_t> u(0, pick.size() - 1);
            for (Index t = 0; t < m_; ++t) {
                const Index r = t < static_cast<Index>(pick.size()) ? pick[static_cast<std::size_t>(t)] : pick[u(rng)];
                pts.row(t) = pool.row(r);
            }
        }
        set_free(c, pts);
    }

    /// Appends a component (its support is left at zero until placed).
    void add_component() {
        support_.push_back(PointMatrix::Zero(m_, dim_));
        if (family_ == ComponentFamily::affine) {
            offset_.push_back(Eigen::VectorXd::Zero(dim_));
            linear_.push_back(Eigen::MatrixXd::Zero(dim_, dim_));
        }
    }

    StackedComponents stacked() const {
        StackedComponents out;
        out.points.resize(k() * m_, dim_);
        out.weights = Eigen::VectorXd::Constant(k() * m_, 1.0 / static_cast<double>(m_));
        for (Index c = 0; c < k(); ++c) {
            out.offset.push_back(c * m_);
            out.points.middleRows(c * m_, m_) = support_[static_cast<std::size_t>(c)];
            out.group.insert(out.group.end(), static_cast<std::size_t>(m_), static_cast<int>(c));
        }
        out.offset.push_back(k() * m_);
        return out;
    }

    std::vector<MixtureComponent> components() const {
        std::vector<MixtureComponent> out;
        out.reserve(support_.size());
        for (const auto& s : support_) {
            out.push_back(MixtureComponent::uniform(s));
        }
        return out;
    }

    /// Transport cost of the given couplings with the current supports.
    double coupled_cost(const ColumnMasses& cols, double exponent) const {
        double total = 0;
        for (Index c = 0; c < k(); ++c) {
            for (Index j = 0; j < m_; ++j) {
                total += cols.cost(c * m_ + j, support_[static_cast<std::size_t>(c)].row(j).data(), dim_, exponent);
            }
        }
        return total;
    }

    /**
     * One block-coordinate step on the supports with the couplings fixed. For
     * exponent 2 this is the exact minimiser (barycentric projection, or weighted
     * least squares over the affine parameters); for exponent 1 a few Weiszfeld /
     * reweighted least-squares steps, each kept only if it lowers the cost.
     */
    void improve(const ColumnMasses& cols, double exponent) {
        for (Index c = 0; c < k(); ++c) {
            if (family_ == ComponentFamily::affine) {
                improve_affine(c, cols, exponent);
            } else {
                improve_free(c, cols, exponent);
            }
        }
    }

private:
    ComponentFamily family_;
    Index m_;
    Index dim_;
    std::vector<PointMatrix> support_;
    PointMatrix latent_;
    std::vector<Eigen::VectorXd> offset_;
    std::vector<Eigen::MatrixXd> linear_;

    static constexpr int kInnerSteps = 3;
    static constexpr double kDistanceFloor = 1e-12;

    /**
     * Weighted mean for exponent 2. For exponent 1 a Weiszfeld step with the
     * Vardi-Zhang correction, which moves off a data point when that point is
     * not the weighted median.
     */
    Eigen::VectorXd location_step(const ColumnMasses& cols, std::size_t lo, std::size_t hi, const Eigen::VectorXd& y,
                                  double exponent) const {
        Eigen::VectorXd num = Eigen::VectorXd::Zero(dim_);
        double den = 0;
        if (exponent == 2.0) {
            for (std::size_t t = lo; t < hi; ++t) {
                num += cols.items[t].mass * Eigen::Map<const Eigen::VectorXd>(cols.items[t].x, dim_);
                den += cols.items[t].mass;
            }
            return den > 0 ? Eigen::VectorXd(num / den) : y;
        }
        Eigen::VectorXd pull = Eigen::VectorXd::Zero(dim_);
        double coincident = 0;
        for (std::size_t t = lo; t < hi; ++t) {
            const Eigen::Map<const Eigen::VectorXd> x(cols.items[t].x, dim_);
            const double dist = (x - y).norm();
            if (dist <= kDistanceFloor) {
                coincident += cols.items[t].mass;
                continue;
            }
            const double w = cols.items[t].mass / dist;
            num += w * x;
            den += w;
            pull += w * (x - y);
        }
        if (!(den > 0)) {
            return y;
        }
        const Eigen::VectorXd target = num / den;
        if (coincident <= 0) {
            return target;
        }
        const double r = pull.norm();
        if (r <= coincident) {
            return y;
        }
        const double keep = coincident / r;
        return (1.0 - keep) * target + keep * y;
    }

    void improve_free(Index c, const ColumnMasses& cols, double exponent) {
        auto& sup = support_[static_cast<std::size_t>(c)];
        for (Index j = 0; j < m_; ++j) {
            const Index col = c * m_ + j;
            const auto lo = static_cast<std::size_t>(cols.start[static_cast<std::size_t>(col)]);
            const auto hi = static_cast<std::size_t>(cols.start[static_cast<std::size_t>(col) + 1]);
            if (lo == hi) {
                continue;
            }
            const int steps = exponent == 2.0 ? 1 : kInnerSteps;
            for (int step = 0; step < steps; ++step) {
                const Eigen::VectorXd proposal = location_step(cols, lo, hi, sup.row(j).transpose(), exponent);
                const double before = cols.cost(col, sup.row(j).data(), dim_, exponent);
                const double after = cols.cost(col, proposal.data(), dim_, exponent);
                if (!(after <= before)) {
                    break;
                }
                sup.row(j) = proposal.transpose();
            }
        }
    }

    void improve_affine(Index c, const ColumnMasses& cols, double exponent) {
        const auto cu = static_cast<std::size_t>(c);
        const int steps = exponent == 2.0 ? 1 : kInnerSteps;
        for (int step = 0; step < steps; ++step) {
            // normal equations for Theta = [b A] with features phi_j = [1; z_j]
            const Index q = dim_ + 1;
            Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(q, q);
            Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(dim_, q);
            double total = 0;
            for (Index j = 0; j < m_; ++j) {
                const Index col = c * m_ + j;
                Eigen::VectorXd phi(q);
                phi[0] = 1.0;
                phi.tail(dim_) = latent_.row(j).transpose();
                double wsum = 0;
                Eigen::VectorXd xsum = Eigen::VectorXd::Zero(dim_);
                for (Index t = cols.start[static_cast<std::size_t>(col)]; t < cols.start[static_cast<std::size_t>(col) + 1]; ++t) {
                    const auto& it = cols.items[static_cast<std::size_t>(t)];
                    const Eigen::Map<const Eigen::VectorXd> x(it.x, dim_);
                    double w = it.mass;
                    if (exponent == 1.0) {
                        w /= std::max(kDistanceFloor, (x - support_[cu].row(j).transpose()).norm());
                    }
                    wsum += w;
                    xsum += w * x;
                }
                gram += wsum * phi * phi.transpose();
                cross += xsum * phi.transpose();
                total += wsum;
            }
            if (!(total > 0)) {
                return;
            }
            const Eigen::MatrixXd theta = gram.completeOrthogonalDecomposition().solve(cross.transpose()).transpose();
            const Eigen::VectorXd b = theta.col(0);
            const Eigen::MatrixXd a = theta.rightCols(dim_);
            const PointMatrix proposal = (latent_ * a.transpose()).rowwise() + b.transpose();
            double before = 0, after = 0;
            for (Index j = 0; j < m_; ++j) {
                before += cols.cost(c * m_ + j, support_[cu].row(j).data(), dim_, exponent);
                after += cols.cost(c * m_ + j, proposal.row(j).data(), dim_, exponent);
            }
            if (!(after <= before)) {
                return;
            }
            offset_[cu] = b;
            linear_[cu] = a;
            support_[cu] = proposal;
        }
    }
};

/// Weighted k-means++ seeding followed by a few Lloyd iterations; returns the cell of every pool row.
inline std::vector<int> kmeans_cells(const PointMatrix& pool, const Eigen::VectorXd& w, Index k, std::mt19937_64& rng,
                                     int lloyd_iterations = 10) {
    const Index n = pool.rows();
    const Index dim = pool.cols();
    PointMatrix centers(k, dim);
    Eigen::VectorXd d2 = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    std::discrete_distribution<Index> first(w.data(), w.data() + n);
    centers.row(0) = pool.row(first(rng));
    for (Index i = 0; i < n; ++i) {
        d2[i] = (pool.row(i) - centers.row(0)).squaredNorm();
    }
    // greedy seeding: several D^2-sampled candidates per centre, keep the one lowering the potential most
    const int trials = 2 + static_cast<int>(std::log(static_cast<double>(k)));
    Eigen::VectorXd cand(n), best_d2(n);
    for (Index c = 1; c < k; ++c) {
        Eigen::VectorXd score = w.cwiseProduct(d2);
        if (!(score.sum() > 0)) {
            score = w;
        }
        std::discrete_distribution<Index> next(score.data(), score.data() + n);
        double best_potential = std::numeric_limits<double>::infinity();
        for (int t = 0; t < trials; ++t) {
            const Index pick = next(rng);
            for (Index i = 0; i < n; ++i) {
                cand[i] = std::min(d2[i], (pool.row(i) - pool.row(pick)).squaredNorm());
            }
            const double potential = w.dot(cand);
            if (potential < best_potential) {
                best_potential = potential;
                best_d2 = cand;
                centers.row(c) = pool.row(pick);
            }
        }
        d2 = best_d2;
    }

    std::vector<int> cell(static_cast<std::size_t>(n), 0);
    for (int it = 0; it <= lloyd_iterations; ++it) {
        for (Index i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (Index c = 0; c < k; ++c) {
                const double d = (pool.row(i) - centers.row(c)).squaredNorm();
                if (d < best) {
                    best = d;
                    cell[static_cast<std::size_t>(i)] = static_cast<int>(c);
                }
            }
        }
        if (it == lloyd_iterations) {
            break;
        }
        PointMatrix sums = PointMatrix::Zero(k, dim);
        Eigen::VectorXd mass = Eigen::VectorXd::Zero(k);
        for (Index i = 0; i < n; ++i) {
            sums.row(cell[static_cast<std::size_t>(i)]) += w[i] * pool.row(i);
            mass[cell[static_cast<std::size_t>(i)]] += w[i];
        }
        for (Index c = 0; c < k; ++c) {
            if (mass[c] > 0) {
                centers.row(c) = sums.row(c) / mass[c];
            }
        }
    }
    return cell;
}

/// The `count` pool rows nearest to `anchor` (ties toward lower index).
inline std::vector<Index> nearest_rows(const PointMatrix& pool, const double* anchor, Index count) {
    const Index n = pool.rows();
    std::vector<std::pair<double, Index>> d(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        d[static_cast<std::size_t>(i)] = {ground_cost(pool.row(i).data(), anchor, pool.cols(), 2.0), i};
    }
    count = std::min(count, n);
    std::partial_sort(d.begin(), d.begin() + count, d.end());
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(count));
    for (Index t = 0; t < count; ++t) {
        out.push_back(d[static_cast<std::size_t>(t)].second);
    }
    return out;
}

/// Initial components: one per k-means cell of the pool; empty cells use the rows nearest their seed.
inline ComponentState initial_components(const PointMatrix& pool, const Eigen::VectorXd& w, Index k, Index m,
                                         ComponentFamily family, std::mt19937_64& rng) {
    ComponentState state(family, k, m, pool.cols(), rng);
    const auto cell = kmeans_cells(pool, w, k, rng);
    std::vector<std::vector<Index>> members(static_cast<std::size_t>(k));
    for (Index i = 0; i < pool.rows(); ++i) {
        members[static_cast<std::size_t>(cell[static_cast<std::size_t>(i)])].push_back(i);
    }
    for (Index c = 0; c < k; ++c) {
        auto& rows = members[static_cast<std::size_t>(c)];
        if (rows.empty()) {
            std::uniform_int_distribution<Index> u(0, pool.rows() - 1);
            rows = nearest_rows(pool, pool.row(u(rng)).data(), m);
        }
        state.place(c, pool, w, rows, rng);
    }
    return state;
}

/// Data row (over all couplings) with the largest total transport cost; returns its coordinates.
inline Eigen::VectorXd costliest_point(const std::vector<Coupling>& couplings, const StackedComponents& stacked,
                                       double exponent) {
    double best = -1;
    Eigen::VectorXd out;
    for (const auto& c : couplings) {
        Eigen::VectorXd per_row = Eigen::VectorXd::Zero(c.data->rows());
        for (const auto& e : c.plan->entries()) {
            per_row[e.row] += e.mass * ground_cost(c.data->row(e.row).data(), stacked.points.row(e.col).data(),
                                                   c.data->cols(), exponent);
        }
        Index arg = 0;
        const double v = per_row.maxCoeff(&arg);
        if (v > best) {
            best = v;
            out = c.data->row(arg).transpose();
        }
    }
    return out;
}

} // namespace detail

} // namespace nwot

#endif
