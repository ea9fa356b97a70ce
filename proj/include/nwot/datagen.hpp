#ifndef NWOT_DATAGEN_HPP
#define NWOT_DATAGEN_HPP

#include "core.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

/**
 * @file datagen.hpp
 *
 * @brief Seeded mixture-of-Gaussians sampling and the named 2D presets.
 *
 * Presets:
 * - grid9: 3x3 grid with side length 4, proportions (i+1)/45 for i = 0..8, fixed
 *   random covariances with eigenvalues in [0.01, 0.05].
 * - ring8_s1_d1 / ring8_s1_d2: eight modes on a circle of radius 2 at angles
 *   2*pi*i/8 (i = 1..8), proportions (i+2)/52 and (11-i)/52, variance 0.02.
 * - ring8_s2_d1 / ring8_s2_d2: as above, with the second ring rotated by pi/8.
 * - twomode_src / twomode_tgt: two separated modes with 4/5, 1/5 flipped to
 *   1/5, 4/5; the target is slightly shifted and wider.
 * - threemode: three separated modes with proportions 2/7, 1/7, 4/7.
 */

namespace nwot {

struct MogSpec {
    std::vector<GaussianComponent> components;
    SimplexVector proportions;
    Index n_samples = 1;
    std::uint64_t seed = 0;
};

struct LabeledSample {
    DiscreteDistribution data;
    std::vector<int> labels;
};

inline LabeledSample sample_mog(const MogSpec& spec) {
    if (spec.components.empty()) {
        throw InvalidArgument("mixture spec has no components");
    }
    if (static_cast<Index>(spec.components.size()) != spec.proportions.size()) {
        throw InvalidArgument("mixture spec: proportions length does not match the component count");
    }
    if (spec.n_samples < 1) {
        throw InvalidArgument("mixture spec: n_samples must be positive");
    }
    const Index dim = spec.components.front().dim();
    for (const auto& c : spec.components) {
        if (c.dim() != dim) {
            throw DimensionMismatch("mixture spec: components have different dimensions");
        }
    }
    std::mt19937_64 rng(spec.seed);
    const auto& pi = spec.proportions.values();
    std::discrete_distribution<int> pick(pi.data(), pi.data() + pi.size());
    std::normal_distribution<double> normal(0.0, 1.0);
    PointMatrix points(spec.n_samples, dim);
    std::vector<int> labels(static_cast<std::size_t>(spec.n_samples));
    Eigen::VectorXd z(dim);
    for (Index i = 0; i < spec.n_samples; ++i) {
        const int c = pick(rng);
        for (Index d = 0; d < dim; ++d) {
            z[d] = normal(rng);
        }
        points.row(i) = spec.components[static_cast<std::size_t>(c)].transform(z).transpose();
        labels[static_cast<std::size_t>(i)] = c;
    }
    return {DiscreteDistribution::uniform(std::move(points)), std::move(labels)};
}

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"grid9",       "ring8_s1_d1", "ring8_s1_d2", "ring8_s2_d1",
                                                "ring8_s2_d2", "twomode_src", "twomode_tgt", "threemode"};
    return names;
}

namespace detail {

inline constexpr std::uint64_t kGridCovarianceSeed = 20190417;
inline constexpr double kRingRadius = 2.0;
inline constexpr double kRingVariance = 0.02;

inline Eigen::MatrixXd isotropic(double variance) { return Eigen::MatrixXd::Identity(2, 2) * variance; }

inline Eigen::VectorXd point2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

inline std::vector<GaussianComponent> grid9_components() {
    std::mt19937_64 rng(kGridCovarianceSeed);
    std::uniform_real_distribution<double> eig(0.01, 0.05);
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
    std::vector<GaussianComponent> out;
    for (int i = 0; i < 9; ++i) {
        const double t = angle(rng);
        Eigen::Matrix2d rot;
        rot << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
        const Eigen::Vector2d lambda(eig(rng), eig(rng));
        Eigen::MatrixXd cov = rot * lambda.asDiagonal() * rot.transpose();
        cov = 0.5 * (cov + cov.transpose());
        out.emplace_back(point2(2.0 * (i % 3), 2.0 * (i / 3)), cov);
    }
    return out;
}

inline std::vector<GaussianComponent> ring8_components(double phase) {
    std::vector<GaussianComponent> out;
    for (int i = 1; i <= 8; ++i) {
        const double t = (2.0 * std::numbers::pi * i + phase) / 8.0;
        out.emplace_back(point2(kRingRadius * std::cos(t), kRingRadius * std::sin(t)), isotropic(kRingVariance));
    }
    return out;
}

inline SimplexVector ring8_proportions(bool second) {
    Eigen::VectorXd pi(8);
    for (int i = 1; i <= 8; ++i) {
        pi[i - 1] = (second ? 11.0 - i : i + 2.0) / 52.0;
    }
    return SimplexVector(pi);
}

} // namespace detail

/// Generating spec of a named preset (true components and proportions).
inline MogSpec preset_spec(const std::string& name, Index n, std::uint64_t seed) {
    using detail::isotropic;
    using detail::point2;
    MogSpec spec;
    spec.n_samples = n;
    spec.seed = seed;
    if (name == "grid9") {
        spec.components = detail::grid9_components();
        Eigen::VectorXd pi(9);
        for (int i = 0; i < 9; ++i) {
            pi[i] = (i + 1) / 45.0;
        }
        spec.proportions = SimplexVector(pi);
    } else if (name == "ring8_s1_d1" || name == "ring8_s2_d1") {
        spec.components = detail::ring8_components(0.0);
        spec.proportions = detail::ring8_proportions(false);
    } else if (name == "ring8_s1_d2") {
        spec.components = detail::ring8_components(0.0);
        spec.proportions = detail::ring8_proportions(true);
    } else if (name == "ring8_s2_d2") {
        spec.components = detail::ring8_components(std::numbers::pi);
        spec.proportions = detail::ring8_proportions(true);
    } else if (name == "twomode_src") {
        spec.components = {GaussianComponent(point2(-2.0, 0.0), isotropic(0.1)),
                           GaussianComponent(point2(2.0, 0.0), isotropic(0.1))};
        spec.proportions = SimplexVector{0.8, 0.2};
    } else if (name == "twomode_tgt") {
        spec.components = {GaussianComponent(point2(-2.0, 0.3), isotropic(0.15)),
                           GaussianComponent(point2(2.0, 0.3), isotropic(0.15))};
        spec.proportions = SimplexVector{0.2, 0.8};
    } else if (name == "threemode") {
        spec.components = {GaussianComponent(point2(0.0, 0.0), isotropic(0.05)),
                           GaussianComponent(point2(3.0, 0.0), isotropic(0.05)),
                           GaussianComponent(point2(1.5, 2.5), isotropic(0.05))};
        spec.proportions = SimplexVector{2.0 / 7.0, 1.0 / 7.0, 4.0 / 7.0};
    } else {
        throw InvalidArgument("unknown preset: " + name);
    }
    return spec;
}

inline LabeledSample preset(const std::string& name, Index n, std::uint64_t seed) {
    return sample_mog(preset_spec(name, n, seed));
}

} // namespace nwot

#endif
