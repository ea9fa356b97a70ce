#ifndef NWOT_FITTING_HPP
#define NWOT_FITTING_HPP

#include "components.hpp"
#include "core.hpp"
#include "mixture_transport.hpp"
#include "nw.hpp"
#include "ot.hpp"
#include "parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

/**
 * @file fitting.hpp
 *
 * @brief Fits a mixture with learned proportions to one dataset by minimising
 * W(x, P_{G,pi}), optionally minus lambda * R where
 *
 *     R = sum_{i > j} pi_i pi_j W(G_i, G_j)
 *
 * rewards well-separated components. With lambda = 0 this is the single-term
 * version of the NW alternation.
 */

namespace nwot {

struct FitConfig {
    Index k = 1;
    double exponent = 1.0;
    double lambda_reg = 0.0;
    Index points_per_component = 32;
    int max_outer_iters = 100;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    int restarts = 5;
    ComponentFamily family = ComponentFamily::free_support;

    void validate() const {
        if (k < 1) {
            throw InvalidArgument("k must be at least 1");
        }
        detail::check_exponent(exponent);
        if (!(lambda_reg >= 0) || !std::isfinite(lambda_reg)) {
            throw InvalidArgument("lambda_reg must be a nonnegative number");
        }
        if (points_per_component < 1) {
            throw InvalidArgument("points_per_component must be positive");
        }
        if (max_outer_iters < 1) {
            throw InvalidArgument("max_outer_iters must be positive");
        }
        if (!(tol > 0)) {
            throw InvalidArgument("tol must be positive");
        }
        if (restarts < 1) {
            throw InvalidArgument("restarts must be positive");
        }
    }
};

struct FitResult {
    MixtureModel model;
    /// W(x, P_{G,pi}) at the returned model.
    double objective = 0;
    double regularizer_value = 0;
    /// Objective W - lambda * R after every (plan, pi) solve.
    std::vector<double> trace;
    bool converged = false;
    int restart = 0;
};

/// sum over i > j of pi_i pi_j W(G_i, G_j), every term an exact transport solve.
inline double regularizer(const MixtureModel& model, double exponent) {
    double total = 0;
    for (Index i = 0; i < model.k(); ++i) {
        for (Index j = 0; j < i; ++j) {
            const double w = model.proportions()[i] * model.proportions()[j];
            if (w <= 0) {
                continue;
            }
            const auto& gi = model.components()[static_cast<std::size_t>(i)];
            const auto& gj = model.components()[static_cast<std::size_t>(j)];
            total += w * wasserstein(cost_matrix(gi.support(), gj.support(), exponent), gi.weights().values(),
                                     gj.weights().values())
                             .value;
        }
    }
    return total;
}

namespace detail {

struct FitState {
    ComponentState state;
    MixtureTransport transport;
    double regularizer = 0;
    double objective = 0;
};

inline MixtureModel model_of(const ComponentState& state, const SimplexVector& pi) {
    return MixtureModel(state.components(), pi);
}

inline FitState evaluate_fit_state(const DiscreteDistribution& x, ComponentState state, double exponent, double lambda,
                                   WarmStart& warm) {
    const auto stacked = state.stacked();
    auto transport = mixture_transport(x.weights(), stacked, cost_matrix(x.points(), stacked.points, exponent), 0.0, &warm);
    const double reg = lambda > 0 ? regularizer(model_of(state, transport.proportions), exponent) : 0.0;
    const double objective = transport.value - lambda * reg;
    return FitState{std::move(state), std::move(transport), reg, objective};
}

/**
 * Gradient of R with respect to every stacked support point, scaled per point
 * by the step length of the data term (the Newton step 1/(2 mu) for exponent 2,
 * the Weiszfeld step for exponent 1).
 */
inline PointMatrix repulsion_direction(const ComponentState& state, const SimplexVector& pi, const ColumnMasses& cols,
                                       const PointMatrix& current, double exponent) {
    const Index m = state.points_per_component();
    const Index dim = state.dim();
    PointMatrix grad = PointMatrix::Zero(current.rows(), dim);
    const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
    for (Index a = 0; a < state.k(); ++a) {
        for (Index b = 0; b < a; ++b) {
            const double w = pi[a] * pi[b];
            if (w <= 0) {
                continue;
            }
            const PointMatrix sa = current.middleRows(a * m, m);
            const PointMatrix sb = current.middleRows(b * m, m);
            const auto res = wasserstein(cost_matrix(sa, sb, exponent), uniform, uniform);
            for (const auto& e : res.plan.entries()) {
                Eigen::RowVectorXd diff = sa.row(e.row) - sb.row(e.col);
                const double norm = diff.norm();
                if (exponent == 1.0) {
                    if (norm <= 0) {
                        continue;
                    }
                    diff /= norm;
                } else {
                    diff *= 2.0;
                }
                grad.row(a * m + e.row) += w * e.mass * diff;
                grad.row(b * m + e.col) -= w * e.mass * diff;
            }
        }
    }
    for (Index j = 0; j < current.rows(); ++j) {
        double step = 0;
        for (Index t = cols.start[static_cast<std::size_t>(j)]; t < cols.start[static_cast<std::size_t>(j) + 1]; ++t) {
            const auto& it = cols.items[static_cast<std::size_t>(t)];
            if (exponent == 2.0) {
                step += 2.0 * it.mass;
            } else {
                const double dist = (Eigen::Map<const Eigen::RowVectorXd>(it.x, dim) - current.row(j)).norm();
                step += it.mass / std::max(dist, 1e-12);
            }
        }
        grad.row(j) = step > 0 ? Eigen::RowVectorXd(grad.row(j) / step) : Eigen::RowVectorXd::Zero(dim);
    }
    return grad;
}

/// Moves every component to the given stacked support (projected onto the family).
inline void assign_supports(ComponentState& state, const PointMatrix& stacked) {
    const Index m = state.points_per_component();
    for (Index c = 0; c < state.k(); ++c) {
        state.fit_support(c, stacked.middleRows(c * m, m));
    }
}

inline FitState fit_run(const DiscreteDistribution& x, const Pool& pool, ComponentState init, const FitConfig& cfg,
                        std::vector<double>& trace, bool& converged, std::mt19937_64& rng) {
    if (cfg.lambda_reg == 0) {
        const AlternationOptions opt{cfg.exponent, 0.0, cfg.max_outer_iters, cfg.tol};
        auto run = alternate({&x}, pool, std::move(init), opt, rng);
        trace = run.trace;
        converged = run.converged;
        return FitState{std::move(run.state), std::move(run.terms[0]), 0.0, run.value};
    }

    WarmStart warm;
    FitState cur = evaluate_fit_state(x, std::move(init), cfg.exponent, cfg.lambda_reg, warm);
    trace = {cur.objective};
    converged = false;
    const Index columns = cur.state.k() * cur.state.points_per_component();
    for (int it = 1; it < cfg.max_outer_iters; ++it) {
        const std::vector<Coupling> couplings{Coupling{&x.points(), &cur.transport.plan}};
        const ColumnMasses cols(couplings, columns);
        const PointMatrix before = cur.state.stacked().points;

        ComponentState data_step = cur.state;
        data_step.improve(cols, cfg.exponent);
        const PointMatrix bary = data_step.stacked().points;
        const PointMatrix push =
            repulsion_direction(cur.state, cur.transport.proportions, cols, before, cfg.exponent) * cfg.lambda_reg;
        const PointMatrix full = bary + push - before;

        std::optional<FitState> accepted;
        for (double factor : {1.0, 0.5, 0.25}) {
            ComponentState candidate = cur.state;
            assign_supports(candidate, before + factor * full);
            WarmStart trial = warm;
            auto next = evaluate_fit_state(x, std::move(candidate), cfg.exponent, cfg.lambda_reg, trial);
            if (next.objective <= cur.objective) {
                warm = trial;
                accepted = std::move(next);
                break;
            }
        }
        if (!accepted) {
            converged = true;
            break;
        }
        const double prev = cur.objective;
        cur = std::move(*accepted);
        trace.push_back(cur.objective);
        if (prev - cur.objective <= cfg.tol * std::max(std::abs(prev), std::numeric_limits<double>::min())) {
            converged = true;
            break;
        }
    }
    return cur;
}

} // namespace detail

/**
 * Fits k components and their proportions to x; best objective over cfg.restarts
 * initialisations (ties toward the lower restart index).
 */
inline FitResult fit_mixture(const DiscreteDistribution& x, const FitConfig& cfg) {
    cfg.validate();
    if (x.size() < cfg.k) {
        throw InvalidArgument("fewer data points than components");
    }
    const detail::Pool pool({&x});
    struct Outcome {
        std::optional<detail::FitState> state;
        std::vector<double> trace;
        bool converged = false;
    };
    std::vector<Outcome> out(static_cast<std::size_t>(cfg.restarts));
    parallel_for(cfg.restarts, [&](int r) {
        auto rng = detail::restart_rng(cfg.seed, static_cast<std::uint64_t>(r));
        auto init = detail::initial_components(pool.points, pool.weights, cfg.k, cfg.points_per_component, cfg.family, rng);
        auto& o = out[static_cast<std::size_t>(r)];
        o.state = detail::fit_run(x, pool, std::move(init), cfg, o.trace, o.converged, rng);
    });
    int best = 0;
    for (int r = 1; r < cfg.restarts; ++r) {
        if (out[static_cast<std::size_t>(r)].state->objective < out[static_cast<std::size_t>(best)].state->objective) {
            best = r;
        }
    }
    auto& win = out[static_cast<std::size_t>(best)];
    FitResult result;
    result.model = detail::model_of(win.state->state, win.state->transport.proportions);
    result.objective = win.state->transport.value;
    result.regularizer_value = win.state->regularizer;
    result.trace = std::move(win.trace);
    result.converged = win.converged;
    result.restart = best;
    return result;
}

/**
 * Normalised squared error ||true - est||^2 / ||true||^2 between proportion
 * vectors in the given order.
 */
inline double pi_error(const SimplexVector& truth, const SimplexVector& est) {
    if (truth.size() != est.size()) {
        throw DimensionMismatch("proportion vectors have different lengths");
    }
    return (truth.values() - est.values()).squaredNorm() / truth.values().squaredNorm();
}

/// Fit quality against a known generating mixture.
struct ModeRecovery {
    /// pi error after matching estimated to true modes by mean distance.
    double pi_error = 0;
    /// For true mode i, the matched estimated component, or -1.
    std::vector<int> matching;
    /// Estimated proportion matched to each true mode (0 when unmatched).
    Eigen::VectorXd matched_pi;
    /// Average distance between true means and the mean of the support assigned to them.
    double mean_error = 0;
    /// Average Frobenius distance between true covariances and the covariance of the support assigned to them.
    double covariance_error = 0;
    /// True modes that no support mass is assigned to.
    int missing_modes = 0;
};

/**
 * Minimum-cost matching between rows and columns of a cost matrix (rectangular
 * allowed): row i is matched to result[i], or -1 when rows outnumber columns.
 */
inline std::vector<int> min_cost_matching(const Eigen::MatrixXd& cost) {
    const Index n = std::max(cost.rows(), cost.cols());
    PointMatrix square = PointMatrix::Zero(n, n);
    square.topLeftCorner(cost.rows(), cost.cols()) = cost;
    const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    const auto res = wasserstein(CostMatrix(square, 1.0), uniform, uniform);
    std::vector<int> match(static_cast<std::size_t>(cost.rows()), -1);
    for (const auto& e : res.plan.entries()) {
        if (e.row < cost.rows() && e.col < cost.cols() && e.mass > 0.5 / static_cast<double>(n)) {
            match[static_cast<std::size_t>(e.row)] = static_cast<int>(e.col);
        }
    }
    return match;
}

inline ModeRecovery evaluate_fit(const MixtureModel& model, const std::vector<GaussianComponent>& true_components,
                                 const SimplexVector& true_pi) {
    const Index kt = static_cast<Index>(true_components.size());
    if (true_pi.size() != kt || kt == 0) {
        throw InvalidArgument("true proportions must match the true components");
    }
    if (model.dim() != true_components.front().dim()) {
        throw DimensionMismatch("model and true components have different dimensions");
    }
    Eigen::MatrixXd cost(kt, model.k());
    for (Index i = 0; i < kt; ++i) {
        for (Index j = 0; j < model.k(); ++j) {
            cost(i, j) = (true_components[static_cast<std::size_t>(i)].mean() - model.components()[static_cast<std::size_t>(j)].mean())
                             .squaredNorm();
        }
    }
    ModeRecovery out;
    out.matching = min_cost_matching(cost);
    out.matched_pi = Eigen::VectorXd::Zero(kt);
    for (Index i = 0; i < kt; ++i) {
        const int j = out.matching[static_cast<std::size_t>(i)];
        if (j >= 0) {
            out.matched_pi[i] = model.proportions()[j];
        }
    }
    out.pi_error = (true_pi.values() - out.matched_pi).squaredNorm() / true_pi.values().squaredNorm();

    // every weighted support point goes to its closest true mean
    const Index dim = model.dim();
    std::vector<double> mass(static_cast<std::size_t>(kt), 0.0);
    std::vector<Eigen::VectorXd> sum(static_cast<std::size_t>(kt), Eigen::VectorXd::Zero(dim));
    std::vector<Eigen::MatrixXd> second(static_cast<std::size_t>(kt), Eigen::MatrixXd::Zero(dim, dim));
    for (Index c = 0; c < model.k(); ++c) {
        const auto& comp = model.components()[static_cast<std::size_t>(c)];
        for (Index s = 0; s < comp.size(); ++s) {
            const double w = model.proportions()[c] * comp.weights()[s];
            if (w <= 0) {
                continue;
            }
            const Eigen::VectorXd p = comp.support().row(s).transpose();
            std::size_t best = 0;
            for (std::size_t i = 1; i < true_components.size(); ++i) {
                if ((p - true_components[i].mean()).squaredNorm() < (p - true_components[best].mean()).squaredNorm()) {
                    best = i;
                }
            }
            mass[best] += w;
            sum[best] += w * p;
            second[best] += w * p * p.transpose();
        }
    }
    int covered = 0;
    for (std::size_t i = 0; i < true_components.size(); ++i) {
        if (mass[i] <= 0) {
            ++out.missing_modes;
            continue;
        }
        const Eigen::VectorXd mean = sum[i] / mass[i];
        const Eigen::MatrixXd cov = second[i] / mass[i] - mean * mean.transpose();
        out.mean_error += (mean - true_components[i].mean()).norm();
        out.covariance_error += (cov - true_components[i].covariance()).norm();
        ++covered;
    }
    if (covered > 0) {
        out.mean_error /= covered;
        out.covariance_error /= covered;
    }
    return out;
}

} // namespace nwot

#endif
