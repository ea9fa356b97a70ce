#ifndef NWOT_CORE_HPP
#define NWOT_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

/**
 * @file core.hpp
 *
 * @brief Domain types shared by every solver: empirical distributions,
 * mixtures, simplex vectors, cost matrices and Gaussian components.
 */

namespace nwot {

/**
 * @brief Base class of every error raised by this library.
 */
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: invalid weights, bad configuration, out-of-range options.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Two inputs live in spaces of different dimension.
class DimensionMismatch : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// An exact solver failed on a problem that should always be solvable.
class SolverError : public Error {
public:
    using Error::Error;
};

/// Absolute tolerance for simplex and weight validity.
inline constexpr double kWeightTolerance = 1e-9;

using Index = Eigen::Index;

/// Points stored one per row.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

inline bool all_finite(const PointMatrix& points) {
    return points.allFinite();
}

inline void check_exponent(double exponent) {
    if (exponent != 1.0 && exponent != 2.0) {
        throw InvalidArgument("ground-cost exponent must be 1 or 2, got " + std::to_string(exponent));
    }
}

inline double ground_cost(const double* a, const double* b, Index dim, double exponent) {
    double sq = 0;
    for (Index d = 0; d < dim; ++d) {
        const double diff = a[d] - b[d];
        sq += diff * diff;
    }
    return exponent == 2.0 ? sq : std::sqrt(sq);
}

} // namespace detail

/**
 * @brief Probability vector: nonnegative entries summing to one.
 *
 * Construction validates and never renormalizes.
 */
class SimplexVector {
public:
    SimplexVector() = default;

    explicit SimplexVector(Eigen::VectorXd values) : values_(std::move(values)) {
        if (values_.size() == 0) {
            throw InvalidArgument("simplex vector must have at least one entry");
        }
        if (!values_.allFinite()) {
            throw InvalidArgument("simplex vector has non-finite entries");
        }
        if (values_.minCoeff() < 0) {
            throw InvalidArgument("simplex vector has a negative entry");
        }
        const double total = values_.sum();
        if (std::abs(total - 1.0) > kWeightTolerance) {
            throw InvalidArgument("simplex vector sums to " + std::to_string(total) + ", not 1");
        }
    }

    SimplexVector(std::initializer_list<double> values)
        : SimplexVector(Eigen::Map<const Eigen::VectorXd>(values.begin(), static_cast<Index>(values.size()))) {}

    static SimplexVector uniform(Index k) {
        if (k < 1) {
            throw InvalidArgument("uniform simplex vector needs k >= 1");
        }
        return SimplexVector(Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k)));
    }

    const Eigen::VectorXd& values() const { return values_; }
    Index size() const { return values_.size(); }
    double operator[](Index i) const { return values_[i]; }

private:
    Eigen::VectorXd values_;
};

/**
 * @brief Weighted point cloud in R^d, the empirical form of a probability measure.
 *
 * Weights may contain zeros; they must be nonnegative and sum to one.
 */
class DiscreteDistribution {
public:
    DiscreteDistribution() = default;

    DiscreteDistribution(PointMatrix points, Eigen::VectorXd weights)
        : points_(std::move(points)), weights_(std::move(weights)) {
        if (points_.rows() < 1) {
            throw InvalidArgument("empty dataset");
        }
        if (points_.cols() < 1) {
            throw InvalidArgument("points must have dimension >= 1");
        }
        if (weights_.size() != points_.rows()) {
            throw InvalidArgument("weights length does not match the number of points");
        }
        if (!detail::all_finite(points_)) {
            throw InvalidArgument("points contain non-finite coordinates");
        }
        if (!weights_.allFinite() || weights_.minCoeff() < 0) {
            throw InvalidArgument("weights must be finite and nonnegative");
        }
        if (std::abs(weights_.sum() - 1.0) > kWeightTolerance) {
            throw InvalidArgument("weights sum to " + std::to_string(weights_.sum()) + ", not 1");
        }
    }

    /// Uniform weights 1/n.
    static DiscreteDistribution uniform(PointMatrix points) {
        const Index n = points.rows();
        if (n < 1) {
            throw InvalidArgument("empty dataset");
        }
        return DiscreteDistribution(std::move(points), Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
    }

    const PointMatrix& points() const { return points_; }
    const Eigen::VectorXd& weights() const { return weights_; }
    Index size() const { return points_.rows(); }
    Index dim() const { return points_.cols(); }
    auto point(Index i) const { return points_.row(i); }

private:
    PointMatrix points_;
    Eigen::VectorXd weights_;
};

/**
 * @brief One mixture component: a nonempty weighted support.
 *
 * Discrete stand-in for the pushforward of a latent normal through one generator.
 */
class MixtureComponent {
public:
    MixtureComponent() = default;

    MixtureComponent(PointMatrix support, SimplexVector weights)
        : support_(std::move(support)), weights_(std::move(weights)) {
        if (support_.rows() < 1) {
            throw InvalidArgument("mixture component needs a nonempty support");
        }
        if (weights_.size() != support_.rows()) {
            throw InvalidArgument("component weights length does not match its support");
        }
        if (!detail::all_finite(support_)) {
            throw InvalidArgument("component support has non-finite coordinates");
        }
    }

    static MixtureComponent uniform(PointMatrix support) {
        const Index m = support.rows();
        return MixtureComponent(std::move(support), SimplexVector::uniform(m));
    }

    static MixtureComponent from_distribution(const DiscreteDistribution& dist) {
        return MixtureComponent(dist.points(), SimplexVector(dist.weights()));
    }

    const PointMatrix& support() const { return support_; }
    const SimplexVector& weights() const { return weights_; }
    Index size() const { return support_.rows(); }
    Index dim() const { return support_.cols(); }

    DiscreteDistribution as_distribution() const { return DiscreteDistribution(support_, weights_.values()); }

    /// Weighted mean of the support.
    Eigen::VectorXd mean() const { return support_.transpose() * weights_.values(); }

    /// Weighted covariance of the support (population normalization).
    Eigen::MatrixXd covariance() const {
        const Eigen::VectorXd mu = mean();
        PointMatrix centered = support_.rowwise() - mu.transpose();
        return centered.transpose() * weights_.values().asDiagonal() * centered;
    }

private:
    PointMatrix support_;
    SimplexVector weights_;
};

/**
 * @brief Components plus proportions; flattens to a single distribution.
 */
class MixtureModel {
public:
    MixtureModel() = default;

    MixtureModel(std::vector<MixtureComponent> components, SimplexVector proportions)
        : components_(std::move(components)), proportions_(std::move(proportions)) {
        if (components_.empty()) {
            throw InvalidArgument("mixture model needs k >= 1 components");
        }
        if (proportions_.size() != static_cast<Index>(components_.size())) {
            throw InvalidArgument("mixture proportions length does not match the component count");
        }
        const Index d = components_.front().dim();
        for (const auto& c : components_) {
            if (c.dim() != d) {
                throw DimensionMismatch("mixture components have different dimensions");
            }
        }
    }

    const std::vector<MixtureComponent>& components() const { return components_; }
    const SimplexVector& proportions() const { return proportions_; }
    Index k() const { return static_cast<Index>(components_.size()); }
    Index dim() const { return components_.front().dim(); }

private:
    std::vector<MixtureComponent> components_;
    SimplexVector proportions_;
};

/**
 * @brief Multivariate Gaussian used to synthesize mixture data.
 */
class GaussianComponent {
public:
    GaussianComponent() = default;

    GaussianComponent(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
        : mean_(std::move(mean)), covariance_(std::move(covariance)) {
        const Index d = mean_.size();
        if (d < 1) {
            throw InvalidArgument("gaussian mean must have dimension >= 1");
        }
        if (covariance_.rows() != d || covariance_.cols() != d) {
            throw DimensionMismatch("gaussian covariance must be d x d");
        }
        if (!mean_.allFinite() || !covariance_.allFinite()) {
            throw InvalidArgument("gaussian parameters must be finite");
        }
        if ((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() > kWeightTolerance) {
            throw InvalidArgument("gaussian covariance is not symmetric");
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance_);
        if (eig.eigenvalues().minCoeff() < -kWeightTolerance) {
            throw InvalidArgument("gaussian covariance is not positive semidefinite");
        }
        // Square-root factor via the eigendecomposition so semidefinite covariances are allowed.
        factor_ = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }

    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& covariance() const { return covariance_; }
    Index dim() const { return mean_.size(); }

    /// Maps a standard normal vector onto this Gaussian.
    Eigen::VectorXd transform(const Eigen::VectorXd& z) const { return mean_ + factor_ * z; }

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd covariance_;
    Eigen::MatrixXd factor_;
};

/**
 * @brief Pairwise ground costs ||a_i - b_j||^p.
 */
class CostMatrix {
public:
    CostMatrix() = default;
    CostMatrix(PointMatrix entries, double exponent) : entries_(std::move(entries)), exponent_(exponent) {}

    const PointMatrix& entries() const { return entries_; }
    double exponent() const { return exponent_; }
    Index rows() const { return entries_.rows(); }
    Index cols() const { return entries_.cols(); }
    double operator()(Index i, Index j) const { return entries_(i, j); }

private:
    PointMatrix entries_;
    double exponent_ = 1.0;
};

inline CostMatrix cost_matrix(const PointMatrix& a, const PointMatrix& b, double exponent) {
    detail::check_exponent(exponent);
    if (a.cols() != b.cols()) {
        throw DimensionMismatch("cost matrix between dimension " + std::to_string(a.cols()) + " and " +
                                std::to_string(b.cols()));
    }
    PointMatrix out(a.rows(), b.rows());
    const Index d = a.cols();
    for (Index i = 0; i < a.rows(); ++i) {
        const double* pa = a.row(i).data();
        for (Index j = 0; j < b.rows(); ++j) {
            out(i, j) = detail::ground_cost(pa, b.row(j).data(), d, exponent);
        }
    }
    return CostMatrix(std::move(out), exponent);
}

inline CostMatrix cost_matrix(const DiscreteDistribution& a, const DiscreteDistribution& b, double exponent) {
    return cost_matrix(a.points(), b.points(), exponent);
}

/**
 * Realizes the mixture as one empirical measure: the weight of support point p of
 * component i is proportions[i] times its within-component weight.
 */
inline DiscreteDistribution flatten(const MixtureModel& model) {
    Index total = 0;
    for (const auto& c : model.components()) {
        total += c.size();
    }
    PointMatrix points(total, model.dim());
    Eigen::VectorXd weights(total);
    Index offset = 0;
    for (Index i = 0; i < model.k(); ++i) {
        const auto& comp = model.components()[static_cast<std::size_t>(i)];
        points.middleRows(offset, comp.size()) = comp.support();
        weights.segment(offset, comp.size()) = model.proportions()[i] * comp.weights().values();
        offset += comp.size();
    }
    return DiscreteDistribution(std::move(points), std::move(weights));
}

/// Concatenates point clouds with matching dimension.
inline PointMatrix stack_points(const std::vector<const PointMatrix*>& parts) {
    Index rows = 0;
    Index d = parts.empty() ? 0 : parts.front()->cols();
    for (const auto* p : parts) {
        if (p->cols() != d) {
            throw DimensionMismatch("cannot stack point sets of different dimension");
        }
        rows += p->rows();
    }
    PointMatrix out(rows, d);
    Index offset = 0;
    for (const auto* p : parts) {
        out.middleRows(offset, p->rows()) = *p;
        offset += p->rows();
    }
    return out;
}

} // namespace nwot

#endif
