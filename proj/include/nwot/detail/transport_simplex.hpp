#ifndef NWOT_DETAIL_TRANSPORT_SIMPLEX_HPP
#define NWOT_DETAIL_TRANSPORT_SIMPLEX_HPP

#include "../core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

/**
 * @file transport_simplex.hpp
 *
 * @brief Exact primal simplex for transport problems whose columns are grouped
 * and whose group masses are free variables.
 *
 * The problem solved is
 *
 *     min  sum_ij C_ij T_ij
 *     s.t. sum_j T_ij = a_i                       for every row i
 *          sum_i T_ij = pi_{g(j)} w_j             for every column j
 *          T >= 0, pi >= 0
 *
 * where g(j) is the group of column j and the weights w_j sum to one inside each
 * group, so sum_g pi_g = 1 is implied. One group with weights b is the classical
 * transportation problem between a and b. An optional fixed demand f_j is added to
 * every column target, in which case sum_g pi_g = 1 - sum_j f_j.
 *
 * A basis is a spanning forest of row/column arcs plus one basic group column per
 * tree. An entering arc whose ends lie in the same tree leaves every pi unchanged
 * and is handled as an ordinary network simplex cycle pivot. Any other pivot
 * couples the trees through a small dense system over the trees and changes
 * every flow, then splits or merges trees incrementally.
 *
 * Supplies are perturbed by tiny generic amounts during the solve so that no basis
 * is degenerate; the optimal basis is re-evaluated with the exact right-hand side.
 */

namespace nwot::detail {

struct GroupedTransportProblem {
    std::span<const double> supply;         ///< Row masses, nonnegative, sum 1.
    std::span<const double> column_weight;  ///< Within-group column weights.
    std::span<const int> column_group;      ///< Group of each column, in [0, groups).
    int groups = 1;
    std::span<const double> cost;           ///< Row-major rows x cols.
    std::span<const double> fixed_demand;   ///< Optional mass every column receives on top of pi_g w_j.
};

/// Basis in compact indices (zero-mass rows and columns removed), reusable when only costs change.
struct GroupedTransportBasis {
    std::vector<std::pair<int, int>> arcs;
    std::vector<int> groups;
    int rows = -1;
    int cols = -1;

    bool empty() const { return arcs.empty() && groups.empty(); }
};

struct FlowEntry {
    Index row;
    Index col;
    double mass;
};

struct GroupedTransportSolution {
    double objective = 0;
    std::vector<double> proportions;
    std::vector<FlowEntry> flows;
    std::vector<double> row_potential;
    std::vector<double> col_potential;
    GroupedTransportBasis basis;
    long iterations = 0;
};

class GroupedTransportSimplex {
public:
    explicit GroupedTransportSimplex(const GroupedTransportProblem& problem) : problem_(problem) { setup(); }

    GroupedTransportSolution solve(const GroupedTransportBasis* warm = nullptr) {
        if (warm == nullptr || !load_basis(*warm)) {
            crash_basis();
            rebuild();
        }
        run();
        return extract();
    }

private:
    static constexpr int kNone = -1;

    using Size = std::size_t;

    const GroupedTransportProblem& problem_;

    int n_ = 0;
    int m_ = 0;
    int groups_ = 0;
    std::vector<int> row_index_;
    std::vector<int> col_index_;
    std::vector<double> supply_;
    std::vector<double> supply_p_;
    std::vector<double> demand_p_;
    std::vector<double> fixed_;
    std::vector<double> weight_;
    std::vector<int> group_;
    std::vector<std::vector<int>> group_cols_;
    std::vector<double> cost_;
    double rc_tol_ = 1e-10;

    // basic arcs live in slots
    std::vector<int> arc_row_, arc_col_;
    std::vector<double> flow_;
    std::vector<char> alive_;
    std::vector<int> free_slots_;
    std::vector<std::vector<int>> adj_;
    std::vector<int> basic_groups_;
    std::vector<int> group_pos_;
    std::vector<double> pi_;

    // forest; nodes are rows [0, n) then columns [n, n + m)
    std::vector<int> order_, parent_slot_, parent_node_, depth_, tree_of_;
    std::vector<int> stamp_;
    // tree ids are recycled; dense_of_ maps live ids to rows of the tree system
    std::vector<int> tree_ids_, dense_of_, tree_size_, free_tree_ids_;
    int next_tree_id_ = 0;
    std::vector<int> depth_count_;
    int stamp_value_ = 0;
    Eigen::PartialPivLU<Eigen::MatrixXd> dlu_;

    // potentials relative to each tree root, plus per-tree offsets alpha solving D^T alpha = g
    std::vector<double> pot_;
    Eigen::VectorXd g_;
    Eigen::VectorXd alpha_;
    std::vector<double> alpha_id_;
    std::vector<double> col_full_;

    std::vector<double> need_, acc_, dir_flow_, dir_pi_, rhs_;
    std::vector<int> path_a_, path_b_, queue_;
    Eigen::VectorXd tree_rhs_;

    std::int64_t next_arc_ = 0;
    long iterations_ = 0;

    int nodes() const { return n_ + m_; }
    double cost(int i, int j) const { return cost_[static_cast<Size>(i) * static_cast<Size>(m_) + static_cast<Size>(j)]; }
    int trees() const { return static_cast<int>(tree_ids_.size()); }

    void setup() {
        const auto& p = problem_;
        const Size rows = p.supply.size();
        const Size cols = p.column_weight.size();
        if (p.column_group.size() != cols || p.cost.size() != rows * cols || p.groups < 1 ||
            (!p.fixed_demand.empty() && p.fixed_demand.size() != cols)) {
            throw InvalidArgument("grouped transport problem has inconsistent sizes");
        }
        auto fixed_at = [&p](Size j) { return p.fixed_demand.empty() ? 0.0 : p.fixed_demand[j]; };
        groups_ = p.groups;
        for (Size i = 0; i < rows; ++i) {
            if (!(p.supply[i] >= 0)) {
                throw InvalidArgument("supply must be nonnegative");
            }
            if (p.supply[i] > 0) {
                row_index_.push_back(static_cast<int>(i));
            }
        }
        std::vector<double> group_total(static_cast<Size>(groups_), 0.0);
        for (Size j = 0; j < cols; ++j) {
            const int g = p.column_group[j];
            if (g < 0 || g >= groups_) {
                throw InvalidArgument("column group out of range");
            }
            if (!(p.column_weight[j] >= 0)) {
                throw InvalidArgument("column weight must be nonnegative");
            }
            if (!(fixed_at(j) >= 0)) {
                throw InvalidArgument("fixed demand must be nonnegative");
            }
            group_total[static_cast<Size>(g)] += p.column_weight[j];
            if (p.column_weight[j] > 0 || fixed_at(j) > 0) {
                col_index_.push_back(static_cast<int>(j));
            }
        }
        for (double t : group_total) {
            if (std::abs(t - 1.0) > kWeightTolerance) {
                throw InvalidArgument("column weights of a group must sum to 1");
            }
        }
        n_ = static_cast<int>(row_index_.size());
        m_ = static_cast<int>(col_index_.size());
        if (n_ == 0) {
            throw InvalidArgument("transport problem has no supply");
        }

        supply_.resize(static_cast<Size>(n_));
        for (int i = 0; i < n_; ++i) {
            supply_[static_cast<Size>(i)] = p.supply[static_cast<Size>(row_index_[static_cast<Size>(i)])];
        }
        weight_.resize(static_cast<Size>(m_));
        fixed_.resize(static_cast<Size>(m_));
        group_.resize(static_cast<Size>(m_));
        group_cols_.assign(static_cast<Size>(groups_), {});
        for (int j = 0; j < m_; ++j) {
            const auto oj = static_cast<Size>(col_index_[static_cast<Size>(j)]);
            weight_[static_cast<Size>(j)] = p.column_weight[oj];
            fixed_[static_cast<Size>(j)] = fixed_at(oj);
            group_[static_cast<Size>(j)] = p.column_group[oj];
            group_cols_[static_cast<Size>(p.column_group[oj])].push_back(j);
        }

        cost_.resize(static_cast<Size>(n_) * static_cast<Size>(m_));
        double cmax = 0;
        for (int i = 0; i < n_; ++i) {
            const Size orow = static_cast<Size>(row_index_[static_cast<Size>(i)]) * cols;
            for (int j = 0; j < m_; ++j) {
                const double c = p.cost[orow + static_cast<Size>(col_index_[static_cast<Size>(j)])];
                if (!std::isfinite(c)) {
                    throw InvalidArgument("transport cost is not finite");
                }
                cost_[static_cast<Size>(i) * static_cast<Size>(m_) + static_cast<Size>(j)] = c;
                cmax = std::max(cmax, std::abs(c));
            }
        }
        rc_tol_ = 1e-11 * std::max(1.0, cmax);

        // deterministic generic perturbation of the right-hand side
        const double min_supply = *std::min_element(supply_.begin(), supply_.end());
        const double eta = 1e-10 * std::min(1.0, min_supply * n_);
        std::mt19937_64 rng(0x9e3779b97f4a7c15ULL ^ (static_cast<std::uint64_t>(n_) << 20) ^ static_cast<std::uint64_t>(m_));
        std::uniform_real_distribution<double> unif(0.5, 1.0);
        supply_p_.resize(supply_.size());
        for (Size i = 0; i < supply_.size(); ++i) {
            supply_p_[i] = supply_[i] + eta * unif(rng);
        }
        demand_p_.resize(static_cast<Size>(m_));
        double fixed_total = 0;
        for (Size j = 0; j < demand_p_.size(); ++j) {
            demand_p_[j] = fixed_[j] + 0.25 * eta * unif(rng);
            fixed_total += demand_p_[j];
        }
        if (fixed_total > std::accumulate(supply_p_.begin(), supply_p_.end(), 0.0)) {
            throw InvalidArgument("fixed column demand exceeds the total supply");
        }

        const auto nn = static_cast<Size>(nodes());
        adj_.assign(nn, {});
        order_.resize(nn);
        parent_slot_.resize(nn);
        parent_node_.resize(nn);
        depth_.resize(nn);
        tree_of_.resize(nn);
        dense_of_.assign(nn + 1, kNone);
        tree_size_.assign(nn + 1, 0);
        alpha_id_.assign(nn + 1, 0.0);
        stamp_.assign(nn, 0);
        pot_.resize(nn);
        need_.resize(nn);
        acc_.resize(nn);
        col_full_.resize(static_cast<Size>(m_));
        group_pos_.assign(static_cast<Size>(groups_), kNone);
    }

    // ---- basis bookkeeping -------------------------------------------------

    void clear_basis() {
        arc_row_.clear();
        arc_col_.clear();
        flow_.clear();
        alive_.clear();
        free_slots_.clear();
        for (auto& a : adj_) {
            a.clear();
        }
        basic_groups_.clear();
        std::fill(group_pos_.begin(), group_pos_.end(), kNone);
        pi_.clear();
    }

    int add_arc(int i, int j, double f) {
        int s;
        if (!free_slots_.empty()) {
            s = free_slots_.back();
            free_slots_.pop_back();
            arc_row_[static_cast<Size>(s)] = i;
            arc_col_[static_cast<Size>(s)] = j;
            flow_[static_cast<Size>(s)] = f;
            alive_[static_cast<Size>(s)] = 1;
        } else {
            s = static_cast<int>(arc_row_.size());
            arc_row_.push_back(i);
            arc_col_.push_back(j);
            flow_.push_back(f);
            alive_.push_back(1);
        }
        adj_[static_cast<Size>(i)].push_back(s);
        adj_[static_cast<Size>(n_ + j)].push_back(s);
        return s;
    }

    void remove_arc(int s) {
        auto drop = [s](std::vector<int>& v) {
            auto it = std::find(v.begin(), v.end(), s);
            *it = v.back();
            v.pop_back();
        };
        drop(adj_[static_cast<Size>(arc_row_[static_cast<Size>(s)])]);
        drop(adj_[static_cast<Size>(n_ + arc_col_[static_cast<Size>(s)])]);
        alive_[static_cast<Size>(s)] = 0;
        free_slots_.push_back(s);
    }

    void add_group(int g, double value) {
        group_pos_[static_cast<Size>(g)] = static_cast<int>(basic_groups_.size());
        basic_groups_.push_back(g);
        pi_.push_back(value);
    }

    void remove_group_at(int pos) {
        const int g = basic_groups_[static_cast<Size>(pos)];
        const int last = static_cast<int>(basic_groups_.size()) - 1;
        if (pos != last) {
            basic_groups_[static_cast<Size>(pos)] = basic_groups_[static_cast<Size>(last)];
            pi_[static_cast<Size>(pos)] = pi_[static_cast<Size>(last)];
            group_pos_[static_cast<Size>(basic_groups_[static_cast<Size>(pos)])] = pos;
        }
        basic_groups_.pop_back();
        pi_.pop_back();
        group_pos_[static_cast<Size>(g)] = kNone;
    }

    int other_end(int v, int s) const {
        return v < n_ ? n_ + arc_col_[static_cast<Size>(s)] : arc_row_[static_cast<Size>(s)];
    }

    bool load_basis(const GroupedTransportBasis& b) {
        if (b.rows != n_ || b.cols != m_ || b.empty()) {
            return false;
        }
        if (static_cast<int>(b.arcs.size() + b.groups.size()) != nodes()) {
            return false;
        }
        clear_basis();
        for (const auto& [i, j] : b.arcs) {
            if (i < 0 || i >= n_ || j < 0 || j >= m_) {
                clear_basis();
                return false;
            }
            add_arc(i, j, 0.0);
        }
        for (int g : b.groups) {
            if (g < 0 || g >= groups_ || group_pos_[static_cast<Size>(g)] != kNone) {
                clear_basis();
                return false;
            }
            add_group(g, 0.0);
        }
        try {
            rebuild();
        } catch (const SolverError&) {
            clear_basis();
            return false;
        }
        for (Size s = 0; s < flow_.size(); ++s) {
            if (alive_[s] && flow_[s] < 0) {
                clear_basis();
                return false;
            }
        }
        for (double v : pi_) {
            if (v < 0) {
                clear_basis();
                return false;
            }
        }
        return true;
    }

    /**
     * Rows go to the group holding their cheapest column. Each group then gets a
     * north-west-corner tree over its rows and columns, with rows ordered by their
     * cheapest column so that the corner rule roughly follows the geometry.
     */
    void crash_basis() {
        if (!crash_basis(false)) {
            crash_basis(true);
        }
    }

    /// Returns false when some bucket cannot cover its fixed demand; single_bucket always succeeds.
    bool crash_basis(bool single_bucket) {
        clear_basis();
        std::vector<int> row_group(static_cast<Size>(n_));
        std::vector<int> row_best_col(static_cast<Size>(n_));
        for (int i = 0; i < n_; ++i) {
            const double* row = cost_.data() + static_cast<Size>(i) * static_cast<Size>(m_);
            const int arg = static_cast<int>(std::min_element(row, row + m_) - row);
            row_best_col[static_cast<Size>(i)] = arg;
            row_group[static_cast<Size>(i)] = single_bucket ? group_[0] : group_[static_cast<Size>(arg)];
        }

        std::vector<std::vector<int>> bucket_rows(static_cast<Size>(groups_));
        for (int i = 0; i < n_; ++i) {
            bucket_rows[static_cast<Size>(row_group[static_cast<Size>(i)])].push_back(i);
        }
        std::vector<std::vector<int>> bucket_cols(static_cast<Size>(groups_));
        for (int g = 0; g < groups_; ++g) {
            if (!bucket_rows[static_cast<Size>(g)].empty()) {
                bucket_cols[static_cast<Size>(g)] = group_cols_[static_cast<Size>(g)];
            }
        }
        // columns of groups without rows hang off the group of their cheapest row
        for (int g = 0; g < groups_; ++g) {
            if (!bucket_rows[static_cast<Size>(g)].empty()) {
                continue;
            }
            for (int j : group_cols_[static_cast<Size>(g)]) {
                int arg = 0;
                for (int i = 1; i < n_; ++i) {
                    if (cost(i, j) < cost(arg, j)) {
                        arg = i;
                    }
                }
                bucket_cols[static_cast<Size>(row_group[static_cast<Size>(arg)])].push_back(j);
            }
        }

        std::vector<int> col_rank(static_cast<Size>(m_), 0);
        for (int g = 0; g < groups_; ++g) {
            auto& rows = bucket_rows[static_cast<Size>(g)];
            if (rows.empty()) {
                continue;
            }
            const auto& cols = bucket_cols[static_cast<Size>(g)];
            for (Size r = 0; r < cols.size(); ++r) {
                col_rank[static_cast<Size>(cols[r])] = static_cast<int>(r);
            }
            std::stable_sort(rows.begin(), rows.end(), [&](int a, int b) {
                return col_rank[static_cast<Size>(row_best_col[static_cast<Size>(a)])] <
                       col_rank[static_cast<Size>(row_best_col[static_cast<Size>(b)])];
            });

            double row_total = 0;
            for (int i : rows) {
                row_total += supply_p_[static_cast<Size>(i)];
            }
            double col_extra = 0;
            for (int j : cols) {
                col_extra += demand_p_[static_cast<Size>(j)];
            }
            const double pig = row_total - col_extra;
            if (pig < 0) {
                return false;
            }
            std::vector<double> rem_s, rem_d;
            rem_s.reserve(rows.size());
            for (int i : rows) {
                rem_s.push_back(supply_p_[static_cast<Size>(i)]);
            }
            rem_d.reserve(cols.size());
            for (int j : cols) {
                const double own = group_[static_cast<Size>(j)] == g ? weight_[static_cast<Size>(j)] * pig : 0.0;
                rem_d.push_back(own + demand_p_[static_cast<Size>(j)]);
            }
            Size r = 0, c = 0;
            while (true) {
                const double f = std::min(rem_s[r], rem_d[c]);
                add_arc(rows[r], cols[c], f);
                rem_s[r] -= f;
                rem_d[c] -= f;
                if (r + 1 == rows.size() && c + 1 == cols.size()) {
                    break;
                }
                if ((rem_s[r] <= rem_d[c] && r + 1 < rows.size()) || c + 1 == cols.size()) {
                    ++r;
                } else {
                    ++c;
                }
            }
            add_group(g, pig);
        }
        return true;
    }

    // ---- forest, linear algebra and potentials ------------------------------

    /// Recomputes the forest, the tree system, primal values and potentials from the basis alone.
    void rebuild() {
        ++stamp_value_;
        tree_ids_.clear();
        free_tree_ids_.clear();
        int head = 0, tail = 0;
        for (int start = 0; start < nodes(); ++start) {
            if (stamp_[static_cast<Size>(start)] == stamp_value_) {
                continue;
            }
            const int t = trees();
            tree_ids_.push_back(t);
            const int first = tail;
            stamp_[static_cast<Size>(start)] = stamp_value_;
            parent_slot_[static_cast<Size>(start)] = kNone;
            parent_node_[static_cast<Size>(start)] = kNone;
            depth_[static_cast<Size>(start)] = 0;
            tree_of_[static_cast<Size>(start)] = t;
            pot_[static_cast<Size>(start)] = 0;
            order_[static_cast<Size>(tail++)] = start;
            while (head < tail) {
                const int v = order_[static_cast<Size>(head++)];
                for (int s : adj_[static_cast<Size>(v)]) {
                    const int w = other_end(v, s);
                    if (stamp_[static_cast<Size>(w)] == stamp_value_) {
                        if (s != parent_slot_[static_cast<Size>(v)]) {
                            throw SolverError("transport basis contains a cycle");
                        }
                        continue;
                    }
                    stamp_[static_cast<Size>(w)] = stamp_value_;
                    parent_slot_[static_cast<Size>(w)] = s;
                    parent_node_[static_cast<Size>(w)] = v;
                    depth_[static_cast<Size>(w)] = depth_[static_cast<Size>(v)] + 1;
                    tree_of_[static_cast<Size>(w)] = t;
                    pot_[static_cast<Size>(w)] = cost(arc_row_[static_cast<Size>(s)], arc_col_[static_cast<Size>(s)]) - pot_[static_cast<Size>(v)];
                    order_[static_cast<Size>(tail++)] = w;
                }
            }
            tree_size_[static_cast<Size>(t)] = tail - first;
        }
        next_tree_id_ = trees();
        std::reverse(order_.begin(), order_.end());
        rebuild_tree_system();
        recompute_primal(true);
    }

    int new_tree_id() {
        int id;
        if (!free_tree_ids_.empty()) {
            id = free_tree_ids_.back();
            free_tree_ids_.pop_back();
        } else {
            id = next_tree_id_++;
        }
        tree_ids_.push_back(id);
        return id;
    }

    void release_tree_id(int id) {
        auto it = std::find(tree_ids_.begin(), tree_ids_.end(), id);
        *it = tree_ids_.back();
        tree_ids_.pop_back();
        free_tree_ids_.push_back(id);
    }

    /// Dense system D(t, c) = weight of group c's columns lying in tree t, and the dual sums g.
    void rebuild_tree_system() {
        if (trees() != static_cast<int>(basic_groups_.size())) {
            throw SolverError("transport basis is singular: tree count differs from basic groups");
        }
        for (int k = 0; k < trees(); ++k) {
            dense_of_[static_cast<Size>(tree_ids_[static_cast<Size>(k)])] = k;
        }
        Eigen::MatrixXd dmat = Eigen::MatrixXd::Zero(trees(), trees());
        g_.setZero(trees());
        for (int j = 0; j < m_; ++j) {
            const int pos = group_pos_[static_cast<Size>(group_[static_cast<Size>(j)])];
            if (pos != kNone) {
                const int v = n_ + j;
                dmat(dense_of_[static_cast<Size>(tree_of_[static_cast<Size>(v)])], pos) += weight_[static_cast<Size>(j)];
                g_[pos] += weight_[static_cast<Size>(j)] * pot_[static_cast<Size>(v)];
            }
        }
        dlu_.compute(dmat);
        if (!(std::abs(dlu_.determinant()) > 1e-300)) {
            throw SolverError("transport basis is singular");
        }
    }

    /// Fills order_ with every node, children before parents, using depths.
    void depth_order() {
        int maxd = 0;
        for (int v = 0; v < nodes(); ++v) {
            maxd = std::max(maxd, depth_[static_cast<Size>(v)]);
        }
        depth_count_.assign(static_cast<Size>(maxd) + 2, 0);
        for (int v = 0; v < nodes(); ++v) {
            ++depth_count_[static_cast<Size>(maxd - depth_[static_cast<Size>(v)]) + 1];
        }
        for (Size d = 1; d < depth_count_.size(); ++d) {
            depth_count_[d] += depth_count_[d - 1];
        }
        for (int v = 0; v < nodes(); ++v) {
            order_[static_cast<Size>(depth_count_[static_cast<Size>(maxd - depth_[static_cast<Size>(v)])]++)] = v;
        }
    }

    /**
     * Solves B x = r for a right-hand side given per node. Arc values land in
     * out_flow (by slot), group values in out_pi (by position). Needs order_ to list
     * children before parents.
     */
    void basis_solve(const std::vector<double>& node_rhs, std::vector<double>& out_flow, std::vector<double>& out_pi) {
        tree_rhs_.setZero(trees());
        for (int v = 0; v < nodes(); ++v) {
            const double r = node_rhs[static_cast<Size>(v)];
            if (r != 0) {
                tree_rhs_[dense_of_[static_cast<Size>(tree_of_[static_cast<Size>(v)])]] += v < n_ ? r : -r;
            }
        }
        const Eigen::VectorXd piv = dlu_.solve(tree_rhs_);
        out_pi.assign(piv.data(), piv.data() + piv.size());
        for (int v = 0; v < nodes(); ++v) {
            double need = node_rhs[static_cast<Size>(v)];
            if (v >= n_) {
                const int j = v - n_;
                const int pos = group_pos_[static_cast<Size>(group_[static_cast<Size>(j)])];
                if (pos != kNone) {
                    need += weight_[static_cast<Size>(j)] * piv[pos];
                }
            }
            need_[static_cast<Size>(v)] = need;
            acc_[static_cast<Size>(v)] = 0;
        }
        out_flow.assign(flow_.size(), 0.0);
        for (int idx = 0; idx < nodes(); ++idx) {
            const int v = order_[static_cast<Size>(idx)];
            const int s = parent_slot_[static_cast<Size>(v)];
            if (s == kNone) {
                continue;
            }
            const double f = need_[static_cast<Size>(v)] - acc_[static_cast<Size>(v)];
            out_flow[static_cast<Size>(s)] = f;
            acc_[static_cast<Size>(parent_node_[static_cast<Size>(v)])] += f;
        }
    }

    void base_rhs(std::vector<double>& rhs, bool perturbed) const {
        rhs.assign(static_cast<Size>(nodes()), 0.0);
        for (int i = 0; i < n_; ++i) {
            rhs[static_cast<Size>(i)] = perturbed ? supply_p_[static_cast<Size>(i)] : supply_[static_cast<Size>(i)];
        }
        for (int j = 0; j < m_; ++j) {
            rhs[static_cast<Size>(n_ + j)] = perturbed ? demand_p_[static_cast<Size>(j)] : fixed_[static_cast<Size>(j)];
        }
    }

    void recompute_primal(bool perturbed) {
        base_rhs(rhs_, perturbed);
        std::vector<double> flows, pis;
        basis_solve(rhs_, flows, pis);
        for (Size s = 0; s < flow_.size(); ++s) {
            if (alive_[s]) {
                flow_[s] = flows[s];
            }
        }
        pi_ = std::move(pis);
    }

    void update_alpha() {
        alpha_ = dlu_.transpose().solve(g_);
        for (int k = 0; k < trees(); ++k) {
            alpha_id_[static_cast<Size>(tree_ids_[static_cast<Size>(k)])] = alpha_[k];
        }
    }

    double row_potential(int i) const { return pot_[static_cast<Size>(i)] + alpha_id_[static_cast<Size>(tree_of_[static_cast<Size>(i)])]; }
    double col_potential(int j) const {
        return pot_[static_cast<Size>(n_ + j)] - alpha_id_[static_cast<Size>(tree_of_[static_cast<Size>(n_ + j)])];
    }

    // ---- pricing -------------------------------------------------------------

    struct Entering {
        bool is_group = false;
        int row = kNone;
        int col = kNone;
        int group = kNone;
    };

    bool price_groups(Entering& e) const {
        if (static_cast<int>(basic_groups_.size()) == groups_) {
            return false;
        }
        double best = -rc_tol_;
        bool found = false;
        for (int g = 0; g < groups_; ++g) {
            if (group_pos_[static_cast<Size>(g)] != kNone) {
                continue;
            }
            double rc = 0;
            for (int j : group_cols_[static_cast<Size>(g)]) {
                rc += weight_[static_cast<Size>(j)] * col_full_[static_cast<Size>(j)];
            }
            if (rc < best) {
                best = rc;
                e = Entering{true, kNone, kNone, g};
                found = true;
            }
        }
        return found;
    }

    /// Block search: the best candidate of the first block holding an improving arc.
    bool price_arcs(Entering& e, bool first_eligible) {
        const std::int64_t total = static_cast<std::int64_t>(n_) * m_;
        const std::int64_t block = first_eligible
                                       ? 1
                                       : std::max<std::int64_t>(32, static_cast<std::int64_t>(std::sqrt(static_cast<double>(total))));
        double best = -rc_tol_;
        std::int64_t best_idx = -1;
        std::int64_t scanned = 0;
        std::int64_t idx = first_eligible ? 0 : next_arc_;
        const double* vfull = col_full_.data();
        while (scanned < total) {
            const int i = static_cast<int>(idx / m_);
            const int j0 = static_cast<int>(idx % m_);
            const std::int64_t in_block = block - (scanned % block);
            const int j1 = static_cast<int>(std::min<std::int64_t>(m_, j0 + in_block));
            const double ui = row_potential(i);
            const double* crow = cost_.data() + static_cast<Size>(i) * static_cast<Size>(m_);
            for (int j = j0; j < j1; ++j) {
                const double rc = crow[j] - ui - vfull[j];
                if (rc < best) {
                    best = rc;
                    best_idx = static_cast<std::int64_t>(i) * m_ + j;
                }
            }
            scanned += j1 - j0;
            idx += j1 - j0;
            if (idx == total) {
                idx = 0;
            }
            if (scanned % block == 0 && best_idx >= 0) {
                break;
            }
        }
        next_arc_ = idx;
        if (best_idx < 0) {
            return false;
        }
        e = Entering{false, static_cast<int>(best_idx / m_), static_cast<int>(best_idx % m_), kNone};
        return true;
    }

    // ---- pivots --------------------------------------------------------------

    /// Entering arc with both ends in one tree: pi is unchanged, flow moves around the cycle.
    double cycle_pivot(int i, int j) {
        const int col_node = n_ + j;
        path_a_.clear();
        path_b_.clear();
        int a = col_node, b = i;
        while (a != b) {
            if (depth_[static_cast<Size>(a)] >= depth_[static_cast<Size>(b)]) {
                path_a_.push_back(a);
                a = parent_node_[static_cast<Size>(a)];
            } else {
                path_b_.push_back(b);
                b = parent_node_[static_cast<Size>(b)];
            }
        }
        // Walking column j -> lca -> row i, arcs alternate decrease/increase, starting with a decrease.
        const Size la = path_a_.size();
        const Size lb = path_b_.size();
        double theta = std::numeric_limits<double>::infinity();
        int leave_node = kNone;
        bool leave_in_a = true;
        for (Size k = 0; k < la; k += 2) {
            const int s = parent_slot_[static_cast<Size>(path_a_[k])];
            const double f = std::max(0.0, flow_[static_cast<Size>(s)]);
            if (f < theta) {
                theta = f;
                leave_node = path_a_[k];
                leave_in_a = true;
            }
        }
        for (Size k = 0; k < lb; ++k) {
            if (((la + lb - 1 - k) & 1U) != 0) {
                continue;
            }
            const int s = parent_slot_[static_cast<Size>(path_b_[k])];
            const double f = std::max(0.0, flow_[static_cast<Size>(s)]);
            if (f < theta) {
                theta = f;
                leave_node = path_b_[k];
                leave_in_a = false;
            }
        }

        for (Size k = 0; k < la; ++k) {
            flow_[static_cast<Size>(parent_slot_[static_cast<Size>(path_a_[k])])] += (k & 1U) ? theta : -theta;
        }
        for (Size k = 0; k < lb; ++k) {
            const bool decrease = ((la + lb - 1 - k) & 1U) == 0;
            flow_[static_cast<Size>(parent_slot_[static_cast<Size>(path_b_[k])])] += decrease ? -theta : theta;
        }

        const int leave_slot = parent_slot_[static_cast<Size>(leave_node)];
        remove_arc(leave_slot);
        const int enter_slot = add_arc(i, j, theta);

        // The subtree below the leaving arc holds one end of the entering arc; re-hang it there.
        const int inside = leave_in_a ? col_node : i;
        const int outside = leave_in_a ? i : col_node;
        rehang(inside, outside, enter_slot, true);
        return theta;
    }

    /**
     * Makes `inside` a child of `outside` through `slot` and re-roots the component of
     * `inside` accordingly, refreshing depths, potentials and tree labels.
     */
    void rehang(int inside, int outside, int slot, bool track_g) {
        const int tree = tree_of_[static_cast<Size>(outside)];
        parent_node_[static_cast<Size>(inside)] = outside;
        parent_slot_[static_cast<Size>(inside)] = slot;
        queue_.clear();
        queue_.push_back(inside);
        for (Size head = 0; head < queue_.size(); ++head) {
            const int v = queue_[head];
            const int p = parent_node_[static_cast<Size>(v)];
            const int ps = parent_slot_[static_cast<Size>(v)];
            depth_[static_cast<Size>(v)] = depth_[static_cast<Size>(p)] + 1;
            tree_of_[static_cast<Size>(v)] = tree;
            const double fresh = cost(arc_row_[static_cast<Size>(ps)], arc_col_[static_cast<Size>(ps)]) - pot_[static_cast<Size>(p)];
            if (track_g && v >= n_) {
                const int pos = group_pos_[static_cast<Size>(group_[static_cast<Size>(v - n_)])];
                if (pos != kNone) {
                    g_[pos] += weight_[static_cast<Size>(v - n_)] * (fresh - pot_[static_cast<Size>(v)]);
                }
            }
            pot_[static_cast<Size>(v)] = fresh;
            for (int s : adj_[static_cast<Size>(v)]) {
                if (s == ps) {
                    continue;
                }
                const int w = other_end(v, s);
                parent_node_[static_cast<Size>(w)] = v;
                parent_slot_[static_cast<Size>(w)] = s;
                queue_.push_back(w);
            }
        }
    }

    /// Detaches the subtree rooted at q (its parent arc already removed) as a new tree.
    void split_off(int q) {
        const int old = tree_of_[static_cast<Size>(q)];
        const int id = new_tree_id();
        parent_node_[static_cast<Size>(q)] = kNone;
        parent_slot_[static_cast<Size>(q)] = kNone;
        queue_.clear();
        queue_.push_back(q);
        for (Size head = 0; head < queue_.size(); ++head) {
            const int v = queue_[head];
            tree_of_[static_cast<Size>(v)] = id;
            for (int s : adj_[static_cast<Size>(v)]) {
                if (s != parent_slot_[static_cast<Size>(v)]) {
                    queue_.push_back(other_end(v, s));
                }
            }
        }
        const int moved = static_cast<int>(queue_.size());
        tree_size_[static_cast<Size>(old)] -= moved;
        tree_size_[static_cast<Size>(id)] = moved;
    }

    /// Any pivot that may move pi: direction over the whole forest, then an incremental split/merge.
    double coupled_pivot(const Entering& e) {
        depth_order();
        std::fill(need_.begin(), need_.end(), 0.0);
        tree_rhs_.setZero(trees());
        auto dense_tree = [this](int v) { return dense_of_[static_cast<Size>(tree_of_[static_cast<Size>(v)])]; };
        if (e.is_group) {
            for (int j : group_cols_[static_cast<Size>(e.group)]) {
                need_[static_cast<Size>(n_ + j)] = -weight_[static_cast<Size>(j)];
                tree_rhs_[dense_tree(n_ + j)] += weight_[static_cast<Size>(j)];
            }
        } else {
            need_[static_cast<Size>(e.row)] = 1.0;
            need_[static_cast<Size>(n_ + e.col)] = 1.0;
            tree_rhs_[dense_tree(e.row)] += 1.0;
            tree_rhs_[dense_tree(n_ + e.col)] -= 1.0;
        }
        const Eigen::VectorXd dpi = dlu_.solve(tree_rhs_);
        for (int j = 0; j < m_; ++j) {
            const int pos = group_pos_[static_cast<Size>(group_[static_cast<Size>(j)])];
            if (pos != kNone) {
                need_[static_cast<Size>(n_ + j)] += weight_[static_cast<Size>(j)] * dpi[pos];
            }
        }
        std::fill(acc_.begin(), acc_.end(), 0.0);
        dir_flow_.resize(flow_.size());
        double dmax = dpi.size() > 0 ? dpi.cwiseAbs().maxCoeff() : 0.0;
        for (int idx = 0; idx < nodes(); ++idx) {
            const int v = order_[static_cast<Size>(idx)];
            const int s = parent_slot_[static_cast<Size>(v)];
            if (s == kNone) {
                continue;
            }
            const double f = need_[static_cast<Size>(v)] - acc_[static_cast<Size>(v)];
            dir_flow_[static_cast<Size>(s)] = f;
            acc_[static_cast<Size>(parent_node_[static_cast<Size>(v)])] += f;
            dmax = std::max(dmax, std::abs(f));
        }

        const double piv_tol = 1e-11 * std::max(1.0, dmax);
        double theta = std::numeric_limits<double>::infinity();
        int leave_slot = kNone;
        int leave_pos = kNone;
        for (Size s = 0; s < flow_.size(); ++s) {
            if (alive_[s] && dir_flow_[s] > piv_tol) {
                const double t = std::max(flow_[s], 0.0) / dir_flow_[s];
                if (t < theta) {
                    theta = t;
                    leave_slot = static_cast<int>(s);
                }
            }
        }
        for (Size p = 0; p < pi_.size(); ++p) {
            if (dpi[static_cast<Index>(p)] > piv_tol) {
                const double t = std::max(pi_[p], 0.0) / dpi[static_cast<Index>(p)];
                if (t < theta) {
                    theta = t;
                    leave_slot = kNone;
                    leave_pos = static_cast<int>(p);
                }
            }
        }
        if (leave_slot == kNone && leave_pos == kNone) {
            throw SolverError("transport simplex found an unbounded direction");
        }
        for (Size s = 0; s < flow_.size(); ++s) {
            if (alive_[s]) {
                flow_[s] -= theta * dir_flow_[s];
            }
        }
        for (Size p = 0; p < pi_.size(); ++p) {
            pi_[p] -= theta * dpi[static_cast<Index>(p)];
        }

        if (leave_slot != kNone) {
            const int r = arc_row_[static_cast<Size>(leave_slot)];
            const int q = parent_slot_[static_cast<Size>(r)] == leave_slot ? r : n_ + arc_col_[static_cast<Size>(leave_slot)];
            remove_arc(leave_slot);
            split_off(q);
        } else {
            remove_group_at(leave_pos);
        }
        if (e.is_group) {
            add_group(e.group, theta);
        } else {
            const int slot = add_arc(e.row, e.col, theta);
            int hang = e.row;
            int stay = n_ + e.col;
            if (tree_size_[static_cast<Size>(tree_of_[static_cast<Size>(hang)])] >
                tree_size_[static_cast<Size>(tree_of_[static_cast<Size>(stay)])]) {
                std::swap(hang, stay);
            }
            const int absorbed = tree_of_[static_cast<Size>(hang)];
            const int kept = tree_of_[static_cast<Size>(stay)];
            rehang(hang, stay, slot, false);
            tree_size_[static_cast<Size>(kept)] += tree_size_[static_cast<Size>(absorbed)];
            release_tree_id(absorbed);
        }
        rebuild_tree_system();
        return theta;
    }

    void run() {
        const long max_iter = 400L * nodes() + 20000L;
        const long refresh_every = std::max(2000L, 4L * nodes());
        int degenerate_streak = 0;
        long since_refresh = 0;
        while (true) {
            update_alpha();
            for (int j = 0; j < m_; ++j) {
                col_full_[static_cast<Size>(j)] = col_potential(j);
            }
            Entering e;
            const bool careful = degenerate_streak > 64;
            if (!price_groups(e) && !price_arcs(e, careful)) {
                break;
            }
            if (++iterations_ > max_iter) {
                throw SolverError("transport simplex exceeded its iteration limit");
            }
            double theta;
            if (!e.is_group && tree_of_[static_cast<Size>(e.row)] == tree_of_[static_cast<Size>(n_ + e.col)]) {
                theta = cycle_pivot(e.row, e.col);
                if (++since_refresh >= refresh_every) {
                    rebuild();
                    since_refresh = 0;
                }
            } else {
                theta = coupled_pivot(e);
                if (++since_refresh >= refresh_every) {
                    rebuild();
                    since_refresh = 0;
                }
            }
            degenerate_streak = theta <= 1e-15 ? degenerate_streak + 1 : 0;
        }
        rebuild();
    }

    GroupedTransportSolution extract() {
        GroupedTransportSolution out;
        out.iterations = iterations_;
        update_alpha();

        // exact right-hand side on the optimal basis
        base_rhs(rhs_, false);
        std::vector<double> flows, pis;
        basis_solve(rhs_, flows, pis);

        out.proportions.assign(static_cast<Size>(groups_), 0.0);
        for (Size p = 0; p < basic_groups_.size(); ++p) {
            out.proportions[static_cast<Size>(basic_groups_[p])] = std::max(0.0, pis[p]);
        }
        // round-off left on degenerate basic arcs
        double supply_max = 0;
        for (double a : problem_.supply) {
            supply_max = std::max(supply_max, a);
        }
        const double snap = 64 * std::numeric_limits<double>::epsilon() * supply_max;
        double objective = 0;
        for (Size s = 0; s < flow_.size(); ++s) {
            if (!alive_[s]) {
                continue;
            }
            out.basis.arcs.emplace_back(arc_row_[s], arc_col_[s]);
            const double f = flows[s];
            if (f > snap) {
                out.flows.push_back(FlowEntry{row_index_[static_cast<Size>(arc_row_[s])], col_index_[static_cast<Size>(arc_col_[s])], f});
                objective += f * cost(arc_row_[s], arc_col_[s]);
            }
        }
        out.objective = objective;
        out.basis.groups = basic_groups_;
        out.basis.rows = n_;
        out.basis.cols = m_;

        // zero-mass rows and columns receive the tightest feasible potential
        const Size rows = problem_.supply.size();
        const Size cols = problem_.column_weight.size();
        constexpr double inf = std::numeric_limits<double>::infinity();
        out.row_potential.assign(rows, inf);
        out.col_potential.assign(cols, inf);
        std::vector<char> row_set(rows, 0), col_set(cols, 0);
        for (int i = 0; i < n_; ++i) {
            const auto oi = static_cast<Size>(row_index_[static_cast<Size>(i)]);
            out.row_potential[oi] = row_potential(i);
            row_set[oi] = 1;
        }
        for (int j = 0; j < m_; ++j) {
            const auto oj = static_cast<Size>(col_index_[static_cast<Size>(j)]);
            out.col_potential[oj] = col_potential(j);
            col_set[oj] = 1;
        }
        for (Size i = 0; i < rows; ++i) {
            if (row_set[i]) {
                continue;
            }
            double best = inf;
            for (Size j = 0; j < cols; ++j) {
                if (col_set[j]) {
                    best = std::min(best, problem_.cost[i * cols + j] - out.col_potential[j]);
                }
            }
            out.row_potential[i] = best;
        }
        for (Size j = 0; j < cols; ++j) {
            if (col_set[j]) {
                continue;
            }
            double best = inf;
            for (Size i = 0; i < rows; ++i) {
                best = std::min(best, problem_.cost[i * cols + j] - out.row_potential[i]);
            }
            out.col_potential[j] = best;
        }
        return out;
    }
};

inline GroupedTransportSolution solve_grouped_transport(const GroupedTransportProblem& problem,
                                                        const GroupedTransportBasis* warm = nullptr) {
    GroupedTransportSimplex solver(problem);
    return solver.solve(warm);
}

} // namespace nwot::detail

#endif
