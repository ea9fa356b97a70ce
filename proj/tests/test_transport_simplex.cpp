#include <nwot/detail/transport_simplex.hpp>

#include <gtest/gtest.h>

#include "support/dense_simplex.hpp"
#include "support/random.hpp"

#include <random>
#include <vector>

namespace {

using nwot::detail::GroupedTransportProblem;

struct Instance {
    int n = 0, m = 0, groups = 0;
    std::vector<double> supply, weight, cost, fixed;
    std::vector<int> group;

    GroupedTransportProblem problem() const {
        GroupedTransportProblem p;
        p.supply = supply;
        p.column_weight = weight;
        p.column_group = group;
        p.groups = groups;
        p.cost = cost;
        p.fixed_demand = fixed;
        return p;
    }
};

Instance random_instance(std::mt19937_64& rng, bool with_floor, bool zero_supply) {
    Instance in;
    in.groups = 1 + static_cast<int>(rng() % 3);
    in.n = 1 + static_cast<int>(rng() % 5);
    in.m = in.groups + static_cast<int>(rng() % 4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Eigen::VectorXd s = nwot_test::random_simplex(rng, in.n);
    in.supply.assign(s.data(), s.data() + in.n);
    if (zero_supply && in.n > 1) {
        const double moved = in.supply[0];
        in.supply[0] = 0;
        in.supply[1] += moved;
    }
    for (int j = 0; j < in.m; ++j) {
        in.group.push_back(j < in.groups ? j : static_cast<int>(rng() % in.groups));
    }
    in.weight.assign(static_cast<std::size_t>(in.m), 0.0);
    for (int g = 0; g < in.groups; ++g) {
        double total = 0;
        for (int j = 0; j < in.m; ++j) {
            if (in.group[j] == g) {
                in.weight[j] = 0.1 + u(rng);
                total += in.weight[j];
            }
        }
        for (int j = 0; j < in.m; ++j) {
            if (in.group[j] == g) {
                in.weight[j] /= total;
            }
        }
    }
    for (int t = 0; t < in.n * in.m; ++t) {
        in.cost.push_back(u(rng));
    }
    if (with_floor) {
        const double floor = u(rng) / in.groups;
        for (int j = 0; j < in.m; ++j) {
            in.fixed.push_back(floor * in.weight[j]);
        }
    }
    return in;
}

// The same LP written out densely: variables T (row-major) then pi.
nwot_test::LpSolution oracle(const Instance& in) {
    const int vars = in.n * in.m + in.groups;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(in.n + in.m, vars);
    Eigen::VectorXd b(in.n + in.m), c = Eigen::VectorXd::Zero(vars);
    for (int i = 0; i < in.n; ++i) {
        for (int j = 0; j < in.m; ++j) {
            a(i, i * in.m + j) = 1;
            a(in.n + j, i * in.m + j) = 1;
            c[i * in.m + j] = in.cost[i * in.m + j];
        }
        b[i] = in.supply[i];
    }
    for (int j = 0; j < in.m; ++j) {
        a(in.n + j, in.n * in.m + in.group[j]) = -in.weight[j];
        b[in.n + j] = in.fixed.empty() ? 0.0 : in.fixed[j];
    }
    auto sol = nwot_test::DenseSimplex::solve(a, b, c);
    EXPECT_TRUE(sol.has_value());
    return *sol;
}

void check_against_oracle(const Instance& in, const nwot::detail::GroupedTransportSolution& sol) {
    const auto ref = oracle(in);
    EXPECT_NEAR(sol.objective, ref.objective, 1e-9);

    // primal feasibility of the returned flows and proportions
    std::vector<double> row(in.n, 0.0), col(in.m, 0.0);
    double cost = 0;
    for (const auto& f : sol.flows) {
        EXPECT_GE(f.mass, 0.0);
        row[f.row] += f.mass;
        col[f.col] += f.mass;
        cost += f.mass * in.cost[f.row * in.m + f.col];
    }
    EXPECT_NEAR(cost, sol.objective, 1e-9);
    for (int i = 0; i < in.n; ++i) {
        EXPECT_NEAR(row[i], in.supply[i], 1e-9);
    }
    ASSERT_EQ(static_cast<int>(sol.proportions.size()), in.groups);
    for (int j = 0; j < in.m; ++j) {
        const double demand = sol.proportions[in.group[j]] * in.weight[j] + (in.fixed.empty() ? 0.0 : in.fixed[j]);
        EXPECT_NEAR(col[j], demand, 1e-9);
    }
    for (double p : sol.proportions) {
        EXPECT_GE(p, -1e-12);
    }

    // dual feasibility and zero gap
    ASSERT_EQ(static_cast<int>(sol.row_potential.size()), in.n);
    ASSERT_EQ(static_cast<int>(sol.col_potential.size()), in.m);
    double dual = 0;
    for (int i = 0; i < in.n; ++i) {
        for (int j = 0; j < in.m; ++j) {
            EXPECT_LE(sol.row_potential[i] + sol.col_potential[j], in.cost[i * in.m + j] + 1e-9);
        }
        dual += in.supply[i] * sol.row_potential[i];
    }
    std::vector<double> group_reduced(in.groups, 0.0);
    for (int j = 0; j < in.m; ++j) {
        group_reduced[in.group[j]] += in.weight[j] * sol.col_potential[j];
        dual += (in.fixed.empty() ? 0.0 : in.fixed[j]) * sol.col_potential[j];
    }
    for (double r : group_reduced) {
        EXPECT_GE(r, -1e-9);
    }
    EXPECT_NEAR(dual, sol.objective, 1e-9);
}

TEST(GroupedTransport, MatchesDenseOracle) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        const auto in = random_instance(rng, false, trial % 4 == 0);
        SCOPED_TRACE(trial);
        check_against_oracle(in, nwot::detail::solve_grouped_transport(in.problem()));
    }
}

TEST(GroupedTransport, MatchesDenseOracleWithFixedDemand) {
    std::mt19937_64 rng(100);
    for (int trial = 0; trial < 300; ++trial) {
        const auto in = random_instance(rng, true, trial % 3 == 0);
        SCOPED_TRACE(trial);
        check_against_oracle(in, nwot::detail::solve_grouped_transport(in.problem()));
    }
}

TEST(GroupedTransport, WarmStartAfterCostChange) {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 100; ++trial) {
        auto in = random_instance(rng, trial % 2 == 0, false);
        const auto first = nwot::detail::solve_grouped_transport(in.problem());
        for (auto& c : in.cost) {
            c *= 1.0 + 0.3 * std::uniform_real_distribution<double>()(rng);
        }
        SCOPED_TRACE(trial);
        check_against_oracle(in, nwot::detail::solve_grouped_transport(in.problem(), &first.basis));
    }
}

TEST(GroupedTransport, ForeignBasisFallsBackToColdStart) {
    std::mt19937_64 rng(102);
    const auto a = random_instance(rng, false, false);
    auto b = random_instance(rng, false, false);
    const auto first = nwot::detail::solve_grouped_transport(a.problem());
    check_against_oracle(b, nwot::detail::solve_grouped_transport(b.problem(), &first.basis));
}

TEST(GroupedTransport, SeparatedGroupsRecoverMixtureProportions) {
    // rows are exact copies of the columns reweighted by (0.8, 0.2)
    Instance in;
    in.n = 4;
    in.m = 4;
    in.groups = 2;
    in.supply = {0.4, 0.4, 0.1, 0.1};
    in.weight = {0.5, 0.5, 0.5, 0.5};
    in.group = {0, 0, 1, 1};
    const double x[4] = {0.0, 1.0, 10.0, 11.0};
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            in.cost.push_back(std::abs(x[i] - x[j]));
        }
    }
    const auto sol = nwot::detail::solve_grouped_transport(in.problem());
    EXPECT_NEAR(sol.objective, 0.0, 1e-12);
    EXPECT_NEAR(sol.proportions[0], 0.8, 1e-12);
    EXPECT_NEAR(sol.proportions[1], 0.2, 1e-12);
}

TEST(GroupedTransport, LargerInstanceIsOptimal) {
    // no dense oracle at this size: check primal/dual certificates only
    std::mt19937_64 rng(103);
    const int n = 300, groups = 5, per = 20, m = groups * per;
    Instance in;
    in.n = n;
    in.m = m;
    in.groups = groups;
    const Eigen::VectorXd s = nwot_test::random_simplex(rng, n);
    in.supply.assign(s.data(), s.data() + n);
    for (int j = 0; j < m; ++j) {
        in.group.push_back(j / per);
        in.weight.push_back(1.0 / per);
    }
    const auto rows = nwot_test::random_points(rng, n, 2);
    const auto cols = nwot_test::random_points(rng, m, 2);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            in.cost.push_back((rows.row(i) - cols.row(j)).squaredNorm());
        }
    }
    const auto sol = nwot::detail::solve_grouped_transport(in.problem());
    double dual = 0;
    double worst = 0;
    for (int i = 0; i < n; ++i) {
        dual += in.supply[i] * sol.row_potential[i];
        for (int j = 0; j < m; ++j) {
            worst = std::max(worst, sol.row_potential[i] + sol.col_potential[j] - in.cost[i * m + j]);
        }
    }
    EXPECT_LE(worst, 1e-9);
    EXPECT_NEAR(dual, sol.objective, 1e-9);
    double total = 0;
    for (double p : sol.proportions) {
        total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
}

} // namespace
