#ifndef NWOT_CLI_HPP
#define NWOT_CLI_HPP

#include "applications.hpp"
#include "clustering.hpp"
#include "core.hpp"
#include "datagen.hpp"
#include "fitting.hpp"
#include "io.hpp"
#include "mode_count.hpp"
#include "nw.hpp"
#include "ot.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

/**
 * @file cli.hpp
 *
 * @brief The `nwot` command line. Exit status: 0 on success, 2 on any error
 * (one `error: ...` line on stderr), and for `compare` 10 / 11 / 12 for SAME /
 * SAME_COMPONENTS_DIFFERENT_PROPORTIONS / DIFFERENT_COMPONENTS unless
 * --no-verdict-exit is given.
 */

namespace nwot::cli {

inline constexpr int kExitError = 2;

namespace detail {

struct SolverOptions {
    Index k = 1;
    double p = 1.0;
    int restarts = 5;
    int max_iters = 100;
    double tol = 1e-6;
    double floor = 0.0;
    std::uint64_t seed = 0;
    Index points = 32;
    std::string family = "free";
};

inline void add_solver_options(CLI::App* sub, SolverOptions& o, bool with_k, bool with_floor) {
    if (with_k) {
        sub->add_option("--k", o.k, "Number of mixture components")->required()->check(CLI::PositiveNumber);
    }
    sub->add_option("--p", o.p, "Ground-cost exponent (1 or 2)")->check(CLI::IsMember({1.0, 2.0}))->capture_default_str();
    sub->add_option("--restarts", o.restarts, "Random initialisations")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--max-iters", o.max_iters, "Outer iterations per initialisation")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--tol", o.tol, "Relative objective change that stops the alternation")->capture_default_str();
    sub->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    sub->add_option("--points-per-component", o.points, "Support points per component")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--family", o.family, "Component family: free or affine")
        ->check(CLI::IsMember({"free", "affine"}))
        ->capture_default_str();
    if (with_floor) {
        sub->add_option("--floor", o.floor, "Lower bound on every proportion")->capture_default_str();
    }
}

inline NwConfig nw_config(const SolverOptions& o) {
    NwConfig cfg;
    cfg.k = o.k;
    cfg.exponent = o.p;
    cfg.restarts = o.restarts;
    cfg.max_outer_iters = o.max_iters;
    cfg.tol = o.tol;
    cfg.proportion_floor = o.floor;
    cfg.seed = o.seed;
    cfg.points_per_component = o.points;
    cfg.family = parse_family(o.family);
    cfg.validate();
    return cfg;
}

inline json config_json(const SolverOptions& o, bool with_k, bool with_floor) {
    json out;
    if (with_k) {
        out["k"] = o.k;
    }
    out["p"] = o.p;
    out["restarts"] = o.restarts;
    out["max_iters"] = o.max_iters;
    out["tol"] = o.tol;
    out["seed"] = o.seed;
    out["points_per_component"] = o.points;
    out["family"] = o.family;
    if (with_floor) {
        out["floor"] = o.floor;
    }
    return out;
}

inline PointsFile load(const std::string& path, std::ostream& err) {
    auto f = read_points_csv(path);
    if (f.warning) {
        err << "warning: " << path << ": " << *f.warning << '\n';
    }
    return f;
}

/// Empirical Gaussian of every labelled class and the class frequencies.
inline std::pair<std::vector<GaussianComponent>, SimplexVector> class_statistics(const DiscreteDistribution& data,
                                                                                  const std::vector<int>& labels) {
    const auto classes = split_by_label(data, labels);
    std::vector<GaussianComponent> gaussians;
    Eigen::VectorXd freq(static_cast<Index>(classes.size()));
    for (std::size_t c = 0; c < classes.size(); ++c) {
        const auto comp = MixtureComponent::from_distribution(classes[c]);
        Eigen::MatrixXd cov = comp.covariance();
        cov = 0.5 * (cov + cov.transpose());
        gaussians.emplace_back(comp.mean(), cov);
        freq[static_cast<Index>(c)] = 0;
    }
    for (int l : labels) {
        freq[l] += 1;
    }
    return {std::move(gaussians), SimplexVector(freq / freq.sum())};
}

inline std::string fmt(double v) { return ::nwot::detail::format_real(v); }

inline void print_vector(std::ostream& out, const std::string& name, const Eigen::VectorXd& v) {
    out << name << '=';
    for (Index i = 0; i < v.size(); ++i) {
        out << (i ? "," : "") << fmt(v[i]);
    }
    out << '\n';
}

} // namespace detail

/// Runs the command line; returns the process exit status.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Normalized Wasserstein toolkit: exact transport, NW measure, mixture fitting, mode counting,\n"
                 "clustering, the W/NW comparative test and class reweighting.\n"
                 "Exit status: 0 ok, 2 error; compare returns 10 SAME, 11 SAME_COMPONENTS_DIFFERENT_PROPORTIONS,\n"
                 "12 DIFFERENT_COMPONENTS unless --no-verdict-exit.",
                 "nwot"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::function<int()> action;

    // gen
    std::string preset_name, gen_out;
    Index gen_n = 1000;
    std::uint64_t gen_seed = 0;
    auto* gen = app.add_subcommand("gen", "Sample a preset dataset to a points CSV");
    gen->add_option("--preset", preset_name, "Preset name")->required()->check(CLI::IsMember(preset_names()));
    gen->add_option("--n", gen_n, "Number of samples")->check(CLI::PositiveNumber)->capture_default_str();
    gen->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
    gen->add_option("--out", gen_out, "Output CSV")->required();
    gen->callback([&] {
        action = [&] {
            const auto s = preset(preset_name, gen_n, gen_seed);
            write_points_csv(gen_out, s.data, &s.labels);
            out << "wrote " << gen_out << " n=" << gen_n << '\n';
            return 0;
        };
    });

    // wasserstein
    std::string wa, wb, wplan, wreport;
    double wp = 1.0;
    auto* was = app.add_subcommand("wasserstein", "Exact transport cost between two points files");
    was->add_option("--a", wa, "First points CSV")->required();
    was->add_option("--b", wb, "Second points CSV")->required();
    was->add_option("--p", wp, "Ground-cost exponent (1 or 2)")->check(CLI::IsMember({1.0, 2.0}))->capture_default_str();
    was->add_option("--plan", wplan, "Write the optimal plan (row,col,mass) to this CSV");
    was->add_option("--report", wreport, "Write a JSON report");
    was->callback([&] {
        action = [&] {
            const auto a = detail::load(wa, err);
            const auto b = detail::load(wb, err);
            const auto res = wasserstein(a.data, b.data, wp);
            out << "value=" << detail::fmt(res.value) << '\n';
            if (!wplan.empty()) {
                write_atomic(wplan, plan_csv(res.plan));
            }
            if (!wreport.empty()) {
                write_report(wreport, make_report("wasserstein", json{{"a", wa}, {"b", wb}, {"p", wp}},
                                                  json{{"value", res.value}, {"plan", to_json(res.plan)}}));
            }
            return 0;
        };
    });

    // nw
    std::string na, nb, nreport;
    detail::SolverOptions nopt;
    auto* nw = app.add_subcommand("nw", "Normalized Wasserstein measure between two points files");
    nw->add_option("--a", na, "First points CSV")->required();
    nw->add_option("--b", nb, "Second points CSV")->required();
    detail::add_solver_options(nw, nopt, true, true);
    nw->add_option("--report", nreport, "Write a JSON report");
    nw->callback([&] {
        action = [&] {
            const auto cfg = detail::nw_config(nopt);
            const auto a = detail::load(na, err);
            const auto b = detail::load(nb, err);
            const auto res = nw_measure(a.data, b.data, cfg);
            out << "nw=" << detail::fmt(res.value) << '\n';
            detail::print_vector(out, "pi1", res.pi1.values());
            detail::print_vector(out, "pi2", res.pi2.values());
            out << "converged=" << (res.converged ? "true" : "false") << '\n';
            if (!nreport.empty()) {
                auto config = detail::config_json(nopt, true, true);
                config["a"] = na;
                config["b"] = nb;
                write_report(nreport, make_report("nw", config, to_json(res)));
            }
            return 0;
        };
    });

    // fit
    std::string fdata, freport;
    double flambda = 0.0;
    detail::SolverOptions fopt;
    auto* fit = app.add_subcommand("fit", "Fit a mixture with learned proportions to one points file");
    fit->add_option("--data", fdata, "Points CSV (labels enable recovery metrics)")->required();
    detail::add_solver_options(fit, fopt, true, false);
    fit->add_option("--lambda-reg", flambda, "Weight of the component-separation regulariser")->capture_default_str();
    fit->add_option("--report", freport, "Write a JSON report");

    // cluster
    std::string cdata, cout_path = "cluster_labels.csv", creport;
    double clambda = 0.0;
    detail::SolverOptions copt;
    auto* cluster = app.add_subcommand("cluster", "Fit, then label every point by its nearest component");
    cluster->add_option("--data", cdata, "Points CSV (labels enable scores)")->required();
    detail::add_solver_options(cluster, copt, true, false);
    cluster->add_option("--lambda-reg", clambda, "Weight of the component-separation regulariser")->capture_default_str();
    cluster->add_option("--out", cout_path, "Output CSV with predicted labels")->capture_default_str();
    cluster->add_option("--report", creport, "Write a JSON report");

    auto fit_config = [](const detail::SolverOptions& o, double lambda) {
        FitConfig cfg;
        cfg.k = o.k;
        cfg.exponent = o.p;
        cfg.lambda_reg = lambda;
        cfg.points_per_component = o.points;
        cfg.max_outer_iters = o.max_iters;
        cfg.tol = o.tol;
        cfg.seed = o.seed;
        cfg.restarts = o.restarts;
        cfg.family = parse_family(o.family);
        cfg.validate();
        return cfg;
    };

    fit->callback([&] {
        action = [&] {
            const auto cfg = fit_config(fopt, flambda);
            const auto data = detail::load(fdata, err);
            const auto res = fit_mixture(data.data, cfg);
            out << "objective=" << detail::fmt(res.objective) << '\n';
            out << "regularizer=" << detail::fmt(res.regularizer_value) << '\n';
            detail::print_vector(out, "pi", res.model.proportions().values());
            json results = to_json(res);
            if (data.labels) {
                const auto [truth, freq] = detail::class_statistics(data.data, *data.labels);
                const auto rec = evaluate_fit(res.model, truth, freq);
                const auto scores = score(assign(data.data, res.model), *data.labels);
                out << "pi_error=" << detail::fmt(rec.pi_error) << '\n';
                out << "mean_error=" << detail::fmt(rec.mean_error) << '\n';
                out << "covariance_error=" << detail::fmt(rec.covariance_error) << '\n';
                results["recovery"] = to_json(rec);
                results["label_frequencies"] = to_json(freq);
                results["scores"] = to_json(scores);
            }
            if (!freport.empty()) {
                auto config = detail::config_json(fopt, true, false);
                config["data"] = fdata;
                config["lambda_reg"] = flambda;
                write_report(freport, make_report("fit", config, results));
            }
            return 0;
        };
    });

    cluster->callback([&] {
        action = [&] {
            const auto cfg = fit_config(copt, clambda);
            const auto data = detail::load(cdata, err);
            const auto res = fit_mixture(data.data, cfg);
            const auto labels = assign(data.data, res.model);
            write_points_csv(cout_path, data.data, &labels.labels);
            out << "wrote " << cout_path << '\n';
            detail::print_vector(out, "pi", res.model.proportions().values());
            json results{{"fit", to_json(res)}, {"labels_file", cout_path}};
            if (data.labels) {
                const auto s = score(labels, *data.labels);
                out << "purity=" << detail::fmt(s.purity) << '\n';
                out << "nmi=" << detail::fmt(s.nmi) << '\n';
                out << "ari=" << detail::fmt(s.ari) << '\n';
                results["scores"] = to_json(s);
            }
            if (!creport.empty()) {
                auto config = detail::config_json(copt, true, false);
                config["data"] = cdata;
                config["lambda_reg"] = clambda;
                write_report(creport, make_report("cluster", config, results));
            }
            return 0;
        };
    });

    // sweep
    std::string sa, sb, sreport, scurve = "nw_vs_k.csv";
    Index kmin = 1, kmax = 2;
    std::optional<double> small_thr, gap_thr;
    detail::SolverOptions sopt;
    auto* sweep = app.add_subcommand("sweep", "NW(k) over a range of k and the selected mode count");
    sweep->add_option("--a", sa, "First points CSV")->required();
    sweep->add_option("--b", sb, "Second points CSV (the same file for a self-sweep)")->required();
    sweep->add_option("--kmin", kmin, "Smallest k")->required()->check(CLI::PositiveNumber);
    sweep->add_option("--kmax", kmax, "Largest k")->required()->check(CLI::PositiveNumber);
    sweep->add_option("--small-threshold", small_thr, "Absolute threshold for a small NW(k)");
    sweep->add_option("--gap-threshold", gap_thr, "Absolute threshold for a large drop NW(k-1) - NW(k)");
    detail::add_solver_options(sweep, sopt, false, false);
    sweep->add_option("--curve", scurve, "Output CSV with k, NW(k) and first differences")->capture_default_str();
    sweep->add_option("--report", sreport, "Write a JSON report");
    sweep->callback([&] {
        action = [&] {
            sopt.k = kmax;
            const auto cfg = detail::nw_config(sopt);
            const auto a = detail::load(sa, err);
            const auto b = sa == sb ? a : detail::load(sb, err);
            const auto rep = nw_sweep(a.data, b.data, kmin, kmax, cfg, SweepThresholds{small_thr, gap_thr});
            std::ostringstream curve;
            curve << "k,nw,first_diff\n";
            for (std::size_t i = 0; i < rep.ks.size(); ++i) {
                curve << rep.ks[i] << ',' << detail::fmt(rep.nw_values[i]) << ','
                      << (std::isfinite(rep.first_diffs[i]) ? detail::fmt(rep.first_diffs[i]) : std::string()) << '\n';
            }
            write_atomic(scurve, curve.str());
            for (std::size_t i = 0; i < rep.ks.size(); ++i) {
                out << "k=" << rep.ks[i] << " nw=" << detail::fmt(rep.nw_values[i]) << '\n';
            }
            out << "selected_k=" << rep.selected_k << (rep.heuristic ? " (heuristic)" : "") << '\n';
            if (!rep.monotonicity_violations.empty()) {
                err << "warning: NW(k) increased by more than 5% at " << rep.monotonicity_violations.size() << " k\n";
            }
            if (!sreport.empty()) {
                auto config = detail::config_json(sopt, false, false);
                config["a"] = sa;
                config["b"] = sb;
                config["kmin"] = kmin;
                config["kmax"] = kmax;
                config["small_threshold"] = small_thr ? json(*small_thr) : json(nullptr);
                config["gap_threshold"] = gap_thr ? json(*gap_thr) : json(nullptr);
                write_report(sreport, make_report("sweep", config, to_json(rep)));
            }
            return 0;
        };
    });

    // compare
    std::string ca, cb, cmp_report;
    std::optional<double> low_w;
    double low_ratio = kDefaultLowRatio;
    bool no_verdict_exit = false;
    detail::SolverOptions mopt;
    auto* compare = app.add_subcommand("compare", "W / NW comparative test; the exit status encodes the verdict");
    compare->add_option("--a", ca, "First points CSV")->required();
    compare->add_option("--b", cb, "Second points CSV")->required();
    detail::add_solver_options(compare, mopt, true, false);
    compare->add_option("--low-w", low_w, "W below this means SAME (default: (5% of the pooled diameter)^p)");
    compare->add_option("--low-ratio", low_ratio, "NW/W below this means different proportions only")->capture_default_str();
    compare->add_flag("--no-verdict-exit", no_verdict_exit, "Exit 0 whatever the verdict");
    compare->add_option("--report", cmp_report, "Write a JSON report");
    compare->callback([&] {
        action = [&] {
            const auto cfg = detail::nw_config(mopt);
            const auto a = detail::load(ca, err);
            const auto b = detail::load(cb, err);
            const double lw = low_w ? *low_w : default_low_w(a.data, b.data, cfg.exponent);
            const auto v = comparative_test(a.data, b.data, cfg, lw, low_ratio);
            out << "wasserstein=" << detail::fmt(v.wasserstein) << '\n';
            out << "nw=" << detail::fmt(v.nw) << '\n';
            out << "ratio=" << detail::fmt(v.ratio) << '\n';
            out << "verdict=" << to_string(v.verdict) << '\n';
            if (!cmp_report.empty()) {
                auto config = detail::config_json(mopt, true, false);
                config["a"] = ca;
                config["b"] = cb;
                config["low_w"] = lw;
                config["low_ratio"] = low_ratio;
                write_report(cmp_report, make_report("compare", config, to_json(v)));
            }
            return no_verdict_exit ? 0 : exit_code(v.verdict);
        };
    });

    // da-demo
    std::string dsrc, dtgt, dreport;
    double dp = 1.0;
    auto* da = app.add_subcommand("da-demo", "Reweight labelled source classes onto a target");
    da->add_option("--source", dsrc, "Labelled source points CSV")->required();
    da->add_option("--target", dtgt, "Target points CSV (labels enable cross-mode masses)")->required();
    da->add_option("--p", dp, "Ground-cost exponent (1 or 2)")->check(CLI::IsMember({1.0, 2.0}))->capture_default_str();
    da->add_option("--report", dreport, "Write a JSON report");
    da->callback([&] {
        action = [&] {
            const auto src = detail::load(dsrc, err);
            const auto tgt = detail::load(dtgt, err);
            if (!src.labels) {
                throw InvalidArgument("source file needs a label column");
            }
            const auto rep = da_reweight(split_by_label(src.data, *src.labels), tgt.data, dp, tgt.labels);
            detail::print_vector(out, "estimated_pi", rep.estimated_pi.values());
            out << "objective=" << detail::fmt(rep.objective) << '\n';
            out << "baseline_objective=" << detail::fmt(rep.baseline_objective) << '\n';
            if (rep.cross_mode_mass) {
                out << "cross_mode_mass=" << detail::fmt(*rep.cross_mode_mass) << '\n';
                out << "baseline_cross_mode_mass=" << detail::fmt(*rep.baseline_cross_mode_mass) << '\n';
            }
            if (!dreport.empty()) {
                write_report(dreport, make_report("da-demo", json{{"source", dsrc}, {"target", dtgt}, {"p", dp}}, to_json(rep)));
            }
            return 0;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e, out, err);
        }
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
    try {
        return action ? action() : 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
}

} // namespace nwot::cli

#endif
