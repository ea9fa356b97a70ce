#ifndef NWOT_NW_HPP
#define NWOT_NW_HPP

#include "components.hpp"
#include "core.hpp"
#include "mixture_transport.hpp"
#include "ot.hpp"
#include "parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <utility>
#include <vector>

/**
 * @file nw.hpp
 *
 * @brief Normalized Wasserstein measure between two distributions:
 *
 *     NW(x, y) = min over G, pi1, pi2 of W(x, P_{G,pi1}) + W(y, P_{G,pi2})
 *
 * where G is a list of k shared components. Solved by block-coordinate descent:
 * an exact LP in (plan, pi) per term for fixed G, then a support update for fixed
 * plans. Each block step is exact or accept-only-if-better, so the objective
 * never increases.
 */

namespace nwot {

struct NwConfig {
    Index k = 1;
    double exponent = 1.0;
    int max_outer_iters = 100;
    double tol = 1e-6;
    double proportion_floor = 0.0;
    std::uint64_t seed = 0;
    int restarts = 5;
    Index points_per_component = 32;
    ComponentFamily family = ComponentFamily::free_support;

    void validate() const {
        if (k < 1) {
            throw InvalidArgument("k must be at least 1");
        }
        detail::check_exponent(exponent);
        if (max_outer_iters < 1) {
            throw InvalidArgument("max_outer_iters must be positive");
        }
        if (!(tol > 0)) {
            throw InvalidArgument("tol must be positive");
        }
        if (!(proportion_floor >= 0) || proportion_floor * static_cast<double>(k) > 1.0 + kWeightTolerance) {
            throw InvalidArgument("proportion_floor must satisfy 0 <= k * floor <= 1");
        }
        if (restarts < 1) {
            throw InvalidArgument("restarts must be positive");
        }
        if (points_per_component < 1) {
            throw InvalidArgument("points_per_component must be positive");
        }
    }
};

struct NwResult {
    double value = 0;
    SimplexVector pi1;
    SimplexVector pi2;
    std::vector<MixtureComponent> components;
    TransportPlan plan1;
    TransportPlan plan2;
    /// Objective after every exact (plan, pi) solve.
    std::vector<double> trace;
    bool converged = false;
    /// Index of the winning initialization.
    int restart = 0;
};

namespace detail {

inline bool same_distribution(const DiscreteDistribution& a, const DiscreteDistribution& b) {
    return &a == &b || (a.size() == b.size() && a.dim() == b.dim() && a.points() == b.points() && a.weights() == b.weights());
}

/// Strict weak order on distributions, used to canonicalise argument order.
inline bool distribution_less(const DiscreteDistribution& a, const DiscreteDistribution& b) {
    if (a.size() != b.size()) {
        return a.size() < b.size();
    }
    if (a.dim() != b.dim()) {
        return a.dim() < b.dim();
    }
    const auto pa = a.points().reshaped<Eigen::RowMajor>();
    const auto pb = b.points().reshaped<Eigen::RowMajor>();
    for (Index i = 0; i < pa.size(); ++i) {
        if (pa[i] != pb[i]) {
            return pa[i] < pb[i];
        }
    }
    for (Index i = 0; i < a.size(); ++i) {
        if (a.weights()[i] != b.weights()[i]) {
            return a.weights()[i] < b.weights()[i];
        }
    }
    return false;
}

/// Pooled sample (1/2) x + (1/2) y used for initialisation and reseeding.
struct Pool {
    PointMatrix points;
    Eigen::VectorXd weights;

    Pool(const std::vector<const DiscreteDistribution*>& parts) {
        std::vector<const PointMatrix*> pts;
        Index total = 0;
        for (const auto* p : parts) {
            pts.push_back(&p->points());
            total += p->size();
        }
        points = stack_points(pts);
        weights.resize(total);
        Index row = 0;
        for (const auto* p : parts) {
            weights.segment(row, p->size()) = p->weights() / static_cast<double>(parts.size());
            row += p->size();
        }
    }
};

/// One alternation run; `state` holds the components matching `terms`.
struct AlternationRun {
    ComponentState state;
    std::vector<MixtureTransport> terms;
    std::vector<double> trace;
    double value = std::numeric_limits<double>::infinity();
    bool converged = false;
};

struct AlternationOptions {
    double exponent = 1.0;
    double floor = 0.0;
    int max_outer_iters = 100;
    double tol = 1e-6;
};

inline std::vector<MixtureTransport> solve_terms(const std::vector<const DiscreteDistribution*>& data,
                                                 const std::vector<int>& alias, const ComponentState& state,
                                                 const AlternationOptions& opt, std::vector<WarmStart>& warm) {
    const auto stacked = state.stacked();
    std::vector<MixtureTransport> out(data.size());
    for (std::size_t t = 0; t < data.size(); ++t) {
        if (alias[t] >= 0) {
            out[t] = out[static_cast<std::size_t>(alias[t])];
            continue;
        }
        const auto cost = cost_matrix(data[t]->points(), stacked.points, opt.exponent);
        out[t] = mixture_transport(data[t]->weights(), stacked, cost, opt.floor, &warm[t]);
    }
    return out;
}

/**
 * Block-coordinate descent from a given component state over one or more data
 * terms. Terms with alias[t] >= 0 are identical to an earlier term and reuse its solve.
 */
inline AlternationRun alternate(const std::vector<const DiscreteDistribution*>& data, const Pool& pool,
                                ComponentState state, const AlternationOptions& opt, std::mt19937_64& rng) {
    std::vector<int> alias(data.size(), -1);
    for (std::size_t t = 0; t < data.size(); ++t) {
        for (std::size_t s = 0; s < t; ++s) {
            if (alias[s] < 0 && same_distribution(*data[s], *data[t])) {
                alias[t] = static_cast<int>(s);
                break;
            }
        }
    }
    std::vector<WarmStart> warm(data.size());
    std::vector<bool> reseeded(static_cast<std::size_t>(state.k()), false);
    AlternationRun run{std::move(state), {}, {}, std::numeric_limits<double>::infinity(), false};

    for (int it = 0; it < opt.max_outer_iters; ++it) {
        run.terms = solve_terms(data, alias, run.state, opt, warm);
        double value = 0;
        for (const auto& t : run.terms) {
            value += t.value;
        }
        const double prev = run.value;
        run.value = value;
        run.trace.push_back(value);
        if (it > 0 && prev - value <= opt.tol * std::max(prev, std::numeric_limits<double>::min())) {
            run.converged = true;
            break;
        }
        if (it + 1 == opt.max_outer_iters) {
            break;
        }

        std::vector<Coupling> couplings;
        for (std::size_t t = 0; t < data.size(); ++t) {
            couplings.push_back(Coupling{&data[t]->points(), &run.terms[t].plan});
        }
        // a component unused by every term is moved next to the worst-served data; its
        // columns carry no mass, so the coupled cost is unchanged
        for (Index c = 0; c < run.state.k(); ++c) {
            double used = 0;
            for (const auto& t : run.terms) {
                used += t.proportions[c] - opt.floor;
            }
            if (used > 1e-12 || reseeded[static_cast<std::size_t>(c)]) {
                continue;
            }
            reseeded[static_cast<std::size_t>(c)] = true;
            const auto anchor = costliest_point(couplings, run.state.stacked(), opt.exponent);
            const auto rows = nearest_rows(pool.points, anchor.data(), run.state.points_per_component());
            run.state.place(c, pool.points, pool.weights, rows, rng);
        }
        const ColumnMasses cols(couplings, run.state.k() * run.state.points_per_component());
        run.state.improve(cols, opt.exponent);
    }
    return run;
}

inline AlternationOptions options_of(const NwConfig& cfg) {
    return AlternationOptions{cfg.exponent, cfg.proportion_floor, cfg.max_outer_iters, cfg.tol};
}

inline NwResult to_result(const AlternationRun& run, int restart) {
    NwResult out;
    out.value = run.value;
    out.pi1 = run.terms[0].proportions;
    out.pi2 = run.terms[1].proportions;
    out.plan1 = run.terms[0].plan;
    out.plan2 = run.terms[1].plan;
    out.components = run.state.components();
    out.trace = run.trace;
    out.converged = run.converged;
    out.restart = restart;
    return out;
}

inline void swap_sides(NwResult& r) {
    std::swap(r.pi1, r.pi2);
    std::swap(r.plan1, r.plan2);
}

inline void check_pair(const DiscreteDistribution& x, const DiscreteDistribution& y) {
    if (x.dim() != y.dim()) {
        throw DimensionMismatch("distributions have different dimensions");
    }
}

/// Seeded generator for initialisation r of a run with the given seed.
inline std::mt19937_64 restart_rng(std::uint64_t seed, std::uint64_t r) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(r)};
    return std::mt19937_64(seq);
}

/// All restarts of the alternation for (x, y) in canonical order; the best run and its index.
inline std::pair<AlternationRun, int> nw_runs(const DiscreteDistribution& x, const DiscreteDistribution& y,
                                              const NwConfig& cfg, const std::optional<ComponentState>& extra_start) {
    const std::vector<const DiscreteDistribution*> data{&x, &y};
    const Pool pool(data);
    const auto opt = options_of(cfg);
    const int starts = cfg.restarts + (extra_start ? 1 : 0);
    std::vector<std::optional<AlternationRun>> runs(static_cast<std::size_t>(starts));
    parallel_for(starts, [&](int r) {
        auto rng = restart_rng(cfg.seed, static_cast<std::uint64_t>(r));
        ComponentState init = r < cfg.restarts
                                  ? initial_components(pool.points, pool.weights, cfg.k, cfg.points_per_component, cfg.family, rng)
                                  : *extra_start;
        runs[static_cast<std::size_t>(r)] = alternate(data, pool, std::move(init), opt, rng);
    });
    int best = 0;
    for (int r = 1; r < starts; ++r) {
        if (runs[static_cast<std::size_t>(r)]->value < runs[static_cast<std::size_t>(best)]->value) {
            best = r;
        }
    }
    return {std::move(*runs[static_cast<std::size_t>(best)]), best};
}

} // namespace detail

/**
 * NW with the components held fixed: two independent exact LPs.
 */
inline NwResult nw_fixed_components(const DiscreteDistribution& x, const DiscreteDistribution& y,
                                    const std::vector<MixtureComponent>& components, double exponent) {
    detail::check_pair(x, y);
    const auto stacked = StackedComponents::from(components);
    if (stacked.points.cols() != x.dim()) {
        throw DimensionMismatch("components and distributions have different dimensions");
    }
    auto t1 = mixture_transport(x.weights(), stacked, cost_matrix(x.points(), stacked.points, exponent));
    auto t2 = mixture_transport(y.weights(), stacked, cost_matrix(y.points(), stacked.points, exponent));
    NwResult out;
    out.value = t1.value + t2.value;
    out.pi1 = t1.proportions;
    out.pi2 = t2.proportions;
    out.plan1 = t1.plan;
    out.plan2 = t2.plan;
    out.components = components;
    out.trace = {out.value};
    out.converged = true;
    return out;
}

/**
 * NW measure with k learned components, best over cfg.restarts initialisations.
 * Arguments are put in a canonical order internally, so nw_measure(x, y) and
 * nw_measure(y, x) with the same config agree exactly.
 */
inline NwResult nw_measure(const DiscreteDistribution& x, const DiscreteDistribution& y, const NwConfig& cfg) {
    cfg.validate();
    detail::check_pair(x, y);
    if (x.size() + y.size() < cfg.k) {
        throw InvalidArgument("fewer support points than components");
    }
    const bool swapped = detail::distribution_less(y, x);
    const auto& first = swapped ? y : x;
    const auto& second = swapped ? x : y;
    auto [run, restart] = detail::nw_runs(first, second, cfg, std::nullopt);
    auto out = detail::to_result(run, restart);
    if (swapped) {
        detail::swap_sides(out);
    }
    return out;
}

} // namespace nwot

#endif
