#ifndef NWOT_MODE_COUNT_HPP
#define NWOT_MODE_COUNT_HPP

#include "components.hpp"
#include "core.hpp"
#include "nw.hpp"
#include "ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

/**
 * @file mode_count.hpp
 *
 * @brief Estimates the joint mode count k* by sweeping NW(k) over k.
 *
 * The rule: k* is the smallest k whose NW(k) is small while the drop from
 * NW(k-1) is large. Every k after the first also starts from the best
 * solution for k-1 with one extra component, so NW(k) <= NW(k-1) up to
 * round-off.
 */

namespace nwot {

struct SweepThresholds {
    /// NW(k) counts as small when <= this; default max(0.1 * W(x, y), 2 * min_k NW(k)).
    std::optional<double> small;
    /// NW(k-1) - NW(k) counts as large when >= this; default 0.5 * NW(k-1) (relative).
    std::optional<double> gap;
};

struct ModeSweepReport {
    std::vector<Index> ks;
    std::vector<double> nw_values;
    /// NW(k-1) - NW(k); NaN for the first k of the sweep.
    std::vector<double> first_diffs;
    Index selected_k = 0;
    /// True when no k met both conditions and the largest drop among small values was used.
    bool heuristic = false;
    double wasserstein = 0;
    double small_threshold = 0;
    /// Absolute gap threshold when one was given; otherwise NaN and gap_fraction applies.
    double gap_threshold = std::numeric_limits<double>::quiet_NaN();
    double gap_fraction = 0.5;
    /// Consecutive pairs with NW(k+1) > 1.05 NW(k), reported by the larger k.
    std::vector<Index> monotonicity_violations;
    std::vector<NwResult> results;
};

namespace detail {

inline constexpr double kSmallFractionOfW = 0.1;
inline constexpr double kSmallFactorOfFloor = 2.0;
inline constexpr double kGapFraction = 0.5;
inline constexpr double kLemmaNoise = 0.05;

/// Nested start: the (k-1) solution with one extra component at the worst-served data.
inline ComponentState grow(const AlternationRun& prev, const Pool& pool, const std::vector<const DiscreteDistribution*>& data,
                           double exponent, std::mt19937_64& rng) {
    ComponentState state = prev.state;
    std::vector<Coupling> couplings;
    for (std::size_t t = 0; t < data.size(); ++t) {
        couplings.push_back(Coupling{&data[t]->points(), &prev.terms[t].plan});
    }
    const auto anchor = costliest_point(couplings, state.stacked(), exponent);
    state.add_component();
    const auto rows = nearest_rows(pool.points, anchor.data(), state.points_per_component());
    state.place(state.k() - 1, pool.points, pool.weights, rows, rng);
    return state;
}

} // namespace detail

inline ModeSweepReport nw_sweep(const DiscreteDistribution& x, const DiscreteDistribution& y, Index k_min, Index k_max,
                                const NwConfig& cfg, const SweepThresholds& thresholds = {}) {
    if (k_min < 1 || k_min >= k_max) {
        throw InvalidArgument("sweep range must satisfy 1 <= kmin < kmax");
    }
    detail::check_pair(x, y);
    if (x.size() + y.size() < k_max) {
        throw InvalidArgument("fewer support points than components");
    }
    NwConfig base = cfg;
    base.k = k_max;
    base.validate();

    const bool swapped = detail::distribution_less(y, x);
    const auto& first = swapped ? y : x;
    const auto& second = swapped ? x : y;
    const std::vector<const DiscreteDistribution*> data{&first, &second};
    const detail::Pool pool(data);

    ModeSweepReport report;
    report.wasserstein = wasserstein_value(x, y, cfg.exponent);
    std::optional<detail::AlternationRun> prev;
    for (Index k = k_min; k <= k_max; ++k) {
        NwConfig step = cfg;
        step.k = k;
        std::optional<detail::ComponentState> nested;
        if (prev) {
            auto rng = detail::restart_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL, static_cast<std::uint64_t>(k));
            nested = detail::grow(*prev, pool, data, cfg.exponent, rng);
        }
        auto [run, restart] = detail::nw_runs(first, second, step, nested);
        auto result = detail::to_result(run, restart);
        if (swapped) {
            detail::swap_sides(result);
        }
        report.ks.push_back(k);
        report.nw_values.push_back(result.value);
        report.results.push_back(std::move(result));
        prev = std::move(run);
    }

    const std::size_t count = report.ks.size();
    report.first_diffs.assign(count, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 1; i < count; ++i) {
        report.first_diffs[i] = report.nw_values[i - 1] - report.nw_values[i];
        if (report.nw_values[i] > (1.0 + detail::kLemmaNoise) * report.nw_values[i - 1] + 1e-12) {
            report.monotonicity_violations.push_back(report.ks[i]);
        }
    }
    const double floor = *std::min_element(report.nw_values.begin(), report.nw_values.end());
    report.small_threshold = thresholds.small.value_or(
        std::max(detail::kSmallFractionOfW * report.wasserstein, detail::kSmallFactorOfFloor * floor));
    report.gap_fraction = detail::kGapFraction;
    if (thresholds.gap) {
        report.gap_threshold = *thresholds.gap;
    }
    auto gap_ok = [&](std::size_t i) {
        if (i == 0) {
            // the first k has no predecessor; it qualifies only when it is already small at k = 1
            return report.ks[0] == 1;
        }
        const double need = thresholds.gap ? *thresholds.gap : report.gap_fraction * report.nw_values[i - 1];
        return report.first_diffs[i] >= need;
    };
    for (std::size_t i = 0; i < count; ++i) {
        if (report.nw_values[i] <= report.small_threshold && gap_ok(i)) {
            report.selected_k = report.ks[i];
            return report;
        }
    }
    report.heuristic = true;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < count; ++i) {
        if (report.nw_values[i] <= report.small_threshold && report.first_diffs[i] > best) {
            best = report.first_diffs[i];
            report.selected_k = report.ks[i];
        }
    }
    if (report.selected_k == 0) {
        report.selected_k = report.ks.back();
    }
    return report;
}

} // namespace nwot

#endif
