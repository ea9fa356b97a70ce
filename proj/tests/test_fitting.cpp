#include <nwot/clustering.hpp>
#include <nwot/datagen.hpp>
#include <nwot/fitting.hpp>

#include <gtest/gtest.h>

#include "support/random.hpp"

#include <random>

namespace {

using nwot::FitConfig;
using nwot::GaussianComponent;
using nwot::MixtureComponent;
using nwot::SimplexVector;

nwot::MogSpec balanced_two_modes(nwot::Index n, std::uint64_t seed) {
    const Eigen::Matrix2d cov = 0.05 * Eigen::Matrix2d::Identity();
    return nwot::MogSpec{{GaussianComponent(Eigen::Vector2d(-2, 0), cov), GaussianComponent(Eigen::Vector2d(2, 0), cov)},
                         SimplexVector{0.5, 0.5}, n, seed};
}

void expect_valid_fit(const nwot::FitResult& r) {
    EXPECT_NEAR(r.model.proportions().values().sum(), 1.0, 1e-9);
    EXPECT_GE(r.model.proportions().values().minCoeff(), 0.0);
    const auto flat = nwot::flatten(r.model);
    EXPECT_NEAR(flat.weights().sum(), 1.0, 1e-9);
    EXPECT_GE(flat.weights().minCoeff(), 0.0);
}

TEST(PiError, IdenticalVectorsGiveZero) {
    const SimplexVector v{0.1, 0.3, 0.6};
    EXPECT_EQ(nwot::pi_error(v, v), 0.0);
}

TEST(PiError, HandComputedValue) {
    // (0.2^2 + 0.2^2) / (0.8^2 + 0.2^2) = 0.08 / 0.68
    EXPECT_NEAR(nwot::pi_error(SimplexVector{0.8, 0.2}, SimplexVector{0.6, 0.4}), 0.1176470588235294, 1e-12);
}

TEST(PiError, LengthMismatchThrows) {
    EXPECT_THROW(nwot::pi_error(SimplexVector{0.5, 0.5}, SimplexVector{1.0}), nwot::DimensionMismatch);
}

TEST(EvaluateFit, PermutedEstimateMatchesAfterMatching) {
    const Eigen::Matrix2d cov = 0.01 * Eigen::Matrix2d::Identity();
    const std::vector<GaussianComponent> truth{GaussianComponent(Eigen::Vector2d(0, 0), cov),
                                               GaussianComponent(Eigen::Vector2d(5, 0), cov),
                                               GaussianComponent(Eigen::Vector2d(0, 5), cov)};
    const SimplexVector pi{0.2, 0.3, 0.5};
    // estimated components listed in the order (2, 0, 1)
    std::vector<MixtureComponent> est;
    for (int t : {2, 0, 1}) {
        nwot::PointMatrix pts(2, 2);
        pts.row(0) = truth[static_cast<std::size_t>(t)].mean().transpose() + Eigen::RowVector2d(0.1, 0);
        pts.row(1) = truth[static_cast<std::size_t>(t)].mean().transpose() - Eigen::RowVector2d(0.1, 0);
        est.push_back(MixtureComponent::uniform(pts));
    }
    const auto rec = nwot::evaluate_fit(nwot::MixtureModel(est, SimplexVector{0.5, 0.2, 0.3}), truth, pi);
    EXPECT_NEAR(rec.pi_error, 0.0, 1e-12);
    EXPECT_EQ(rec.matching, (std::vector<int>{1, 2, 0}));
    EXPECT_NEAR(rec.mean_error, 0.0, 1e-12);
    // support covariance is diag(0.01, 0) against 0.01 I
    EXPECT_NEAR(rec.covariance_error, 0.01, 1e-12);
    EXPECT_EQ(rec.missing_modes, 0);
}

TEST(EvaluateFit, ReportsMissingModes) {
    const Eigen::Matrix2d cov = 0.01 * Eigen::Matrix2d::Identity();
    const std::vector<GaussianComponent> truth{GaussianComponent(Eigen::Vector2d(0, 0), cov),
                                               GaussianComponent(Eigen::Vector2d(5, 0), cov)};
    const nwot::MixtureModel model({MixtureComponent::uniform(nwot::PointMatrix::Zero(1, 2))}, SimplexVector{1.0});
    const auto rec = nwot::evaluate_fit(model, truth, SimplexVector{0.5, 0.5});
    EXPECT_EQ(rec.missing_modes, 1);
    EXPECT_EQ(rec.matched_pi[0] + rec.matched_pi[1], 1.0);
    EXPECT_NEAR(rec.pi_error, 1.0, 1e-12);
}

TEST(MinCostMatching, RectangularAndPermutation) {
    Eigen::MatrixXd c(3, 3);
    c << 5, 1, 9, 1, 7, 9, 9, 9, 0;
    EXPECT_EQ(nwot::min_cost_matching(c), (std::vector<int>{1, 0, 2}));
    Eigen::MatrixXd r(3, 2);
    r << 0, 9, 9, 0, 1, 1;
    const auto m = nwot::min_cost_matching(r);
    EXPECT_EQ(m, (std::vector<int>{0, 1, -1}));
}

TEST(FitMixture, SingleGaussianWithOneComponent) {
    nwot::MogSpec spec{{GaussianComponent(Eigen::Vector2d(1, -1), 0.1 * Eigen::Matrix2d::Identity())}, SimplexVector{1.0}, 400, 3};
    const auto x = nwot::sample_mog(spec).data;
    FitConfig cfg;
    cfg.k = 1;
    cfg.restarts = 2;
    const auto r = nwot::fit_mixture(x, cfg);
    EXPECT_EQ(r.model.proportions()[0], 1.0);
    EXPECT_LE((r.model.components()[0].mean() - Eigen::Vector2d(1, -1)).norm(), 0.1);
    // 32 support points quantise a cloud of spread ~0.3; far below the spread itself
    EXPECT_LT(r.objective, 0.15);
    EXPECT_NEAR(r.objective, nwot::wasserstein_value(x, nwot::flatten(r.model), 1.0), 1e-7);
    expect_valid_fit(r);
}

TEST(FitMixture, TraceMonotoneWithoutRegularizer) {
    for (int family = 0; family < 2; ++family) {
        for (double p : {1.0, 2.0}) {
            const auto x = nwot::preset("grid9", 600, 5).data;
            FitConfig cfg;
            cfg.k = 9;
            cfg.exponent = p;
            cfg.restarts = 2;
            cfg.points_per_component = 8;
            cfg.family = family == 0 ? nwot::ComponentFamily::free_support : nwot::ComponentFamily::affine;
            const auto r = nwot::fit_mixture(x, cfg);
            for (std::size_t i = 1; i < r.trace.size(); ++i) {
                EXPECT_LE(r.trace[i], r.trace[i - 1] + 1e-9) << "family " << family << " p " << p << " step " << i;
            }
            EXPECT_NEAR(r.trace.back(), r.objective, 1e-12);
            expect_valid_fit(r);
        }
    }
}

TEST(FitMixture, ObjectiveInvariantUnderComponentRelabelling) {
    const auto x = nwot::preset("threemode", 300, 2).data;
    FitConfig cfg;
    cfg.k = 3;
    cfg.restarts = 1;
    cfg.points_per_component = 8;
    const auto r = nwot::fit_mixture(x, cfg);
    auto comps = r.model.components();
    const double forward = nwot::nw_fixed_components(x, x, comps, 1.0).plan1.objective();
    std::reverse(comps.begin(), comps.end());
    const double reversed = nwot::nw_fixed_components(x, x, comps, 1.0).plan1.objective();
    EXPECT_NEAR(forward, reversed, 1e-9);
    EXPECT_NEAR(forward, r.objective, 1e-7);
}

TEST(FitMixture, RegularizerMatchesIndependentRecomputation) {
    const auto x = nwot::sample_mog(balanced_two_modes(200, 4)).data;
    FitConfig cfg;
    cfg.k = 3;
    cfg.lambda_reg = 0.05;
    cfg.restarts = 1;
    cfg.points_per_component = 6;
    const auto r = nwot::fit_mixture(x, cfg);
    double expected = 0;
    const auto& comps = r.model.components();
    for (std::size_t i = 0; i < comps.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            const double pij = r.model.proportions()[static_cast<nwot::Index>(i)] * r.model.proportions()[static_cast<nwot::Index>(j)];
            expected += pij * nwot::wasserstein_value(nwot::flatten(nwot::MixtureModel({comps[i]}, SimplexVector{1.0})),
                                                      nwot::flatten(nwot::MixtureModel({comps[j]}, SimplexVector{1.0})), 1.0);
        }
    }
    EXPECT_NEAR(r.regularizer_value, expected, 1e-7);
    EXPECT_NEAR(nwot::regularizer(r.model, 1.0), expected, 1e-7);
}

TEST(FitMixture, RegularizedTraceNeverIncreases) {
    const auto x = nwot::preset("threemode", 300, 6).data;
    FitConfig cfg;
    cfg.k = 3;
    cfg.lambda_reg = 0.1;
    cfg.restarts = 2;
    cfg.points_per_component = 8;
    const auto r = nwot::fit_mixture(x, cfg);
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
        EXPECT_LE(r.trace[i], r.trace[i - 1] + 1e-9) << "step " << i;
    }
    EXPECT_NEAR(r.trace.back(), r.objective - cfg.lambda_reg * r.regularizer_value, 1e-9);
    expect_valid_fit(r);
}

TEST(FitMixture, RegularizedComponentsSplitBalancedModes) {
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto sample = nwot::sample_mog(balanced_two_modes(400, seed));
        FitConfig cfg;
        cfg.k = 2;
        cfg.lambda_reg = 0.1;
        cfg.seed = seed;
        cfg.restarts = 2;
        const auto r = nwot::fit_mixture(sample.data, cfg);
        // nearest-component partition is pure with respect to the true modes
        const auto labels = nwot::assign(sample.data, r.model).labels;
        EXPECT_EQ(nwot::score(labels, sample.labels).purity, 1.0) << "seed " << seed;
        for (const auto& c : r.model.components()) {
            const auto& s = c.support();
            EXPECT_TRUE((s.col(0).array() < 0).all() || (s.col(0).array() > 0).all()) << "seed " << seed;
        }
    }
}

TEST(FitMixture, Errors) {
    std::mt19937_64 rng(7);
    const auto x = nwot_test::random_distribution(rng, 3, 2);
    FitConfig cfg;
    cfg.k = 4;
    EXPECT_THROW(nwot::fit_mixture(x, cfg), nwot::InvalidArgument);
    cfg.k = 2;
    cfg.lambda_reg = -1;
    EXPECT_THROW(nwot::fit_mixture(x, cfg), nwot::InvalidArgument);
    cfg.lambda_reg = 0;
    cfg.points_per_component = 0;
    EXPECT_THROW(nwot::fit_mixture(x, cfg), nwot::InvalidArgument);
}

TEST(FitMixture, DeterministicForSeed) {
    const auto x = nwot::preset("threemode", 200, 8).data;
    FitConfig cfg;
    cfg.k = 3;
    cfg.seed = 11;
    cfg.restarts = 3;
    cfg.points_per_component = 6;
    const auto a = nwot::fit_mixture(x, cfg);
    const auto b = nwot::fit_mixture(x, cfg);
    EXPECT_EQ(a.objective, b.objective);
    EXPECT_EQ(a.trace, b.trace);
    EXPECT_EQ(a.model.proportions().values(), b.model.proportions().values());
}

} // namespace
