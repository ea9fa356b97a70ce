#include <nwot/datagen.hpp>
#include <nwot/mode_count.hpp>

#include <gtest/gtest.h>

#include "support/constructions.hpp"
#include "support/random.hpp"

#include <cmath>
#include <random>

namespace {

using nwot::NwConfig;

NwConfig affine_config(nwot::Index m) {
    NwConfig cfg;
    cfg.family = nwot::ComponentFamily::affine;
    cfg.points_per_component = m;
    cfg.restarts = 3;
    return cfg;
}

void expect_report_shape(const nwot::ModeSweepReport& r, nwot::Index kmin, nwot::Index kmax) {
    ASSERT_EQ(static_cast<nwot::Index>(r.ks.size()), kmax - kmin + 1);
    ASSERT_EQ(r.nw_values.size(), r.ks.size());
    ASSERT_EQ(r.first_diffs.size(), r.ks.size());
    ASSERT_EQ(r.results.size(), r.ks.size());
    EXPECT_TRUE(std::isnan(r.first_diffs[0]));
    for (std::size_t i = 0; i < r.ks.size(); ++i) {
        EXPECT_EQ(r.ks[i], kmin + static_cast<nwot::Index>(i));
        EXPECT_EQ(r.nw_values[i], r.results[i].value);
        EXPECT_EQ(static_cast<nwot::Index>(r.results[i].components.size()), r.ks[i]);
        if (i > 0) {
            EXPECT_DOUBLE_EQ(r.first_diffs[i], r.nw_values[i - 1] - r.nw_values[i]);
        }
    }
}

TEST(NwSweep, SingleGaussianSelectsOne) {
    const nwot::MogSpec spec{{nwot::GaussianComponent(Eigen::Vector2d(0, 0), 0.05 * Eigen::Matrix2d::Identity())},
                             nwot::SimplexVector{1.0}, 300, 4};
    const auto x = nwot::sample_mog(spec).data;
    const auto r = nwot::nw_sweep(x, x, 1, 4, affine_config(16));
    expect_report_shape(r, 1, 4);
    EXPECT_EQ(r.selected_k, 1);
    EXPECT_FALSE(r.heuristic);
}

TEST(NwSweep, OverlapConstructionSelectsThreeWithLemmaBounds) {
    const auto inst = nwot_test::overlap_instance(150, 1);
    const auto cfg = affine_config(24);
    const auto r = nwot::nw_sweep(inst.x, inst.y, 1, 5, cfg);
    expect_report_shape(r, 1, 5);
    nwot::FitConfig fc;
    fc.family = cfg.family;
    fc.points_per_component = cfg.points_per_component;
    fc.restarts = 2;
    const double tol = 2 * nwot_test::representation_error(inst, fc);
    EXPECT_NEAR(inst.epsilon, 0.1, 1e-9);
    EXPECT_LE(r.nw_values[2], inst.epsilon + tol);
    EXPECT_GE(r.nw_values[1], 0.5 * inst.delta * inst.eta - tol);
    EXPECT_EQ(r.selected_k, 3);
    EXPECT_TRUE(r.monotonicity_violations.empty());
}

TEST(NwSweep, ExplicitThresholdsAreReported) {
    const auto inst = nwot_test::overlap_instance(80, 2);
    nwot::SweepThresholds th;
    th.small = 0.3;
    th.gap = 0.5;
    const auto r = nwot::nw_sweep(inst.x, inst.y, 1, 4, affine_config(12), th);
    EXPECT_EQ(r.small_threshold, 0.3);
    EXPECT_EQ(r.gap_threshold, 0.5);
    for (std::size_t i = 0; i < r.ks.size(); ++i) {
        if (r.ks[i] == r.selected_k && !r.heuristic) {
            EXPECT_LE(r.nw_values[i], 0.3);
            if (i > 0) {
                EXPECT_GE(r.first_diffs[i], 0.5);
            }
        }
    }
}

TEST(NwSweep, HeuristicFallbackWhenNothingQualifies) {
    const auto inst = nwot_test::overlap_instance(60, 3);
    nwot::SweepThresholds th;
    th.small = 1e9;
    th.gap = 1e9;
    // k_min > 1 so that no entry meets the gap by default
    const auto r = nwot::nw_sweep(inst.x, inst.y, 2, 5, affine_config(8), th);
    EXPECT_TRUE(r.heuristic);
    // largest drop among the small values
    std::size_t best = 1;
    for (std::size_t i = 1; i < r.ks.size(); ++i) {
        if (r.first_diffs[i] > r.first_diffs[best]) {
            best = i;
        }
    }
    EXPECT_EQ(r.selected_k, r.ks[best]);
}

TEST(NwSweep, SymmetricInArgumentOrder) {
    const auto inst = nwot_test::overlap_instance(60, 4);
    const auto cfg = affine_config(8);
    const auto xy = nwot::nw_sweep(inst.x, inst.y, 1, 3, cfg);
    const auto yx = nwot::nw_sweep(inst.y, inst.x, 1, 3, cfg);
    EXPECT_EQ(xy.nw_values, yx.nw_values);
    EXPECT_EQ(xy.selected_k, yx.selected_k);
}

TEST(NwSweep, InvalidRange) {
    std::mt19937_64 rng(5);
    const auto x = nwot_test::random_distribution(rng, 4, 2);
    NwConfig cfg;
    EXPECT_THROW(nwot::nw_sweep(x, x, 0, 3, cfg), nwot::InvalidArgument);
    EXPECT_THROW(nwot::nw_sweep(x, x, 3, 3, cfg), nwot::InvalidArgument);
    EXPECT_THROW(nwot::nw_sweep(x, x, 4, 2, cfg), nwot::InvalidArgument);
    EXPECT_THROW(nwot::nw_sweep(x, x, 1, 20, cfg), nwot::InvalidArgument);
}

} // namespace
