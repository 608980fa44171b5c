#pragma once

// Primal network simplex for the uncapacitated transportation problem
//   min sum_ij c_ij g_ij  s.t.  sum_j g_ij = a_i, sum_i g_ij = b_j, g >= 0,
// with real-valued supplies. The spanning-tree bookkeeping (thread, reverse
// thread, successor counts, last successors) follows the classic LEMON
// layout with block-search pivoting.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "monge/error.hpp"

namespace monge::detail {

class TransportSimplex {
 public:
  /// `cost` is row-major n_rows x n_cols.
  TransportSimplex(std::span<const double> supply, std::span<const double> demand,
                   std::span<const double> cost)
      : n1_(static_cast<int>(supply.size())),
        n2_(static_cast<int>(demand.size())),
        node_num_(n1_ + n2_),
        arc_num_(static_cast<long>(n1_) * n2_),
        root_(node_num_) {
    const long all_arcs = arc_num_ + node_num_;
    const int all_nodes = node_num_ + 1;
    source_.resize(all_arcs);
    target_.resize(all_arcs);
    cost_.resize(all_arcs);
    flow_.assign(all_arcs, 0.0);
    state_.assign(all_arcs, kStateLower);
    for (long e = 0; e < arc_num_; ++e) {
      source_[e] = static_cast<int>(e / n2_);
      target_[e] = n1_ + static_cast<int>(e % n2_);
      cost_[e] = cost[static_cast<std::size_t>(e)];
    }
    supply_.resize(all_nodes);
    double sum = 0.0;
    for (int i = 0; i < n1_; ++i) sum += (supply_[i] = supply[i]);
    for (int j = 0; j < n2_; ++j) sum += (supply_[n1_ + j] = -demand[j]);
    supply_[root_] = -sum;
    pi_.assign(all_nodes, 0.0);
    parent_.assign(all_nodes, -1);
    pred_.assign(all_nodes, -1);
    thread_.assign(all_nodes, 0);
    rev_thread_.assign(all_nodes, 0);
    succ_num_.assign(all_nodes, 0);
    last_succ_.assign(all_nodes, 0);
    pred_dir_.assign(all_nodes, kDirUp);
    block_size_ = std::max<long>(10, static_cast<long>(std::sqrt(static_cast<double>(arc_num_))));
  }

  /// Runs to optimality; returns false if the iteration cap is hit.
  bool run(long max_pivots = -1) {
    init_tree();
    if (max_pivots < 0) max_pivots = std::max<long>(1000000, 50 * arc_num_);
    long pivots = 0;
    while (find_entering_arc()) {
      if (++pivots > max_pivots) return false;
      find_join_node();
      if (!find_leaving_arc()) return false;  // unbounded cannot happen here
      change_flow();
      update_tree_structure();
      update_potential();
    }
    return true;
  }

  double flow(int i, int j) const { return flow_[static_cast<long>(i) * n2_ + j]; }
  double row_potential(int i) const { return pi_[i]; }
  double col_potential(int j) const { return pi_[n1_ + j]; }
  int rows() const { return n1_; }
  int cols() const { return n2_; }

  /// Smallest reduced cost over real arcs (>= 0 up to rounding at optimum).
  double min_reduced_cost() const {
    double m = INFINITY;
    for (long e = 0; e < arc_num_; ++e) m = std::min(m, cost_[e] + pi_[source_[e]] - pi_[target_[e]]);
    return m;
  }

 private:
  static constexpr int kStateTree = 0;
  static constexpr int kStateLower = 1;
  static constexpr int kDirUp = 1;
  static constexpr int kDirDown = -1;

  void init_tree() {
    double max_cost = 0.0;
    for (long e = 0; e < arc_num_; ++e) max_cost = std::max(max_cost, std::abs(cost_[e]));
    const double art_cost = (max_cost + 1.0) * node_num_;

    parent_[root_] = -1;
    pred_[root_] = -1;
    thread_[root_] = 0;
    rev_thread_[0] = root_;
    succ_num_[root_] = node_num_ + 1;
    last_succ_[root_] = root_ - 1;
    pi_[root_] = 0.0;
    for (int u = 0; u < node_num_; ++u) {
      const long e = arc_num_ + u;
      parent_[u] = root_;
      pred_[u] = e;
      thread_[u] = u + 1;
      rev_thread_[u + 1] = u;
      succ_num_[u] = 1;
      last_succ_[u] = u;
      state_[e] = kStateTree;
      if (supply_[u] >= 0.0) {
        pred_dir_[u] = kDirUp;
        pi_[u] = 0.0;
        source_[e] = u;
        target_[e] = root_;
        flow_[e] = supply_[u];
        cost_[e] = 0.0;
      } else {
        pred_dir_[u] = kDirDown;
        pi_[u] = art_cost;
        source_[e] = root_;
        target_[e] = u;
        flow_[e] = -supply_[u];
        cost_[e] = art_cost;
      }
    }
  }

  double reduced_cost(long e) const { return cost_[e] + pi_[source_[e]] - pi_[target_[e]]; }

  bool eligible(long e, double c) const {
    const double scale = std::abs(cost_[e]) + std::abs(pi_[source_[e]]) + std::abs(pi_[target_[e]]);
    return c < -1e-14 * scale;
  }

  bool find_entering_arc() {
    double best = 0.0;
    long cnt = block_size_;
    long found = -1;
    long e = next_arc_;
    for (long k = 0; k < arc_num_; ++k, e = (e + 1 == arc_num_ ? 0 : e + 1)) {
      if (state_[e] != kStateTree) {
        const double c = state_[e] * reduced_cost(e);
        if (c < best && eligible(e, c)) {
          best = c;
          found = e;
        }
      }
      if (--cnt == 0) {
        if (found >= 0) {
          next_arc_ = e + 1 == arc_num_ ? 0 : e + 1;
          in_arc_ = found;
          return true;
        }
        cnt = block_size_;
      }
    }
    if (found < 0) return false;
    next_arc_ = e;
    in_arc_ = found;
    return true;
  }

  void find_join_node() {
    int u = source_[in_arc_];
    int v = target_[in_arc_];
    while (u != v) {
      if (succ_num_[u] < succ_num_[v])
        u = parent_[u];
      else
        v = parent_[v];
    }
    join_ = u;
  }

  bool find_leaving_arc() {
    int first, second;
    if (state_[in_arc_] == kStateLower) {
      first = source_[in_arc_];
      second = target_[in_arc_];
    } else {
      first = target_[in_arc_];
      second = source_[in_arc_];
    }
    delta_ = INFINITY;
    int result = 0;
    for (int u = first; u != join_; u = parent_[u]) {
      const double d = pred_dir_[u] == kDirDown ? INFINITY : flow_[pred_[u]];
      if (d < delta_) {
        delta_ = d;
        u_out_ = u;
        result = 1;
      }
    }
    for (int u = second; u != join_; u = parent_[u]) {
      const double d = pred_dir_[u] == kDirUp ? INFINITY : flow_[pred_[u]];
      if (d <= delta_) {
        delta_ = d;
        u_out_ = u;
        result = 2;
      }
    }
    if (result == 1) {
      u_in_ = first;
      v_in_ = second;
    } else {
      u_in_ = second;
      v_in_ = first;
    }
    return result != 0;
  }

  void change_flow() {
    if (delta_ > 0.0) {
      const double val = state_[in_arc_] * delta_;
      flow_[in_arc_] += val;
      for (int u = source_[in_arc_]; u != join_; u = parent_[u]) flow_[pred_[u]] -= pred_dir_[u] * val;
      for (int u = target_[in_arc_]; u != join_; u = parent_[u]) flow_[pred_[u]] += pred_dir_[u] * val;
    }
    state_[in_arc_] = kStateTree;
    const long out = pred_[u_out_];
    flow_[out] = 0.0;
    state_[out] = kStateLower;
  }

  void update_tree_structure() {
    const int old_rev_thread = rev_thread_[u_out_];
    const int old_succ_num = succ_num_[u_out_];
    const int old_last_succ = last_succ_[u_out_];
    v_out_ = parent_[u_out_];

    if (u_in_ == u_out_) {
      parent_[u_in_] = v_in_;
      pred_[u_in_] = in_arc_;
      pred_dir_[u_in_] = u_in_ == source_[in_arc_] ? kDirUp : kDirDown;
      if (thread_[v_in_] != u_out_) {
        int after = thread_[old_last_succ];
        thread_[old_rev_thread] = after;
        rev_thread_[after] = old_rev_thread;
        after = thread_[v_in_];
        thread_[v_in_] = u_out_;
        rev_thread_[u_out_] = v_in_;
        thread_[old_last_succ] = after;
        rev_thread_[after] = old_last_succ;
      }
    } else {
      const int thread_continue = old_rev_thread == v_in_ ? thread_[old_last_succ] : thread_[v_in_];
      int stem = u_in_;
      int par_stem = v_in_;
      int last = last_succ_[u_in_];
      int after = thread_[last];
      thread_[v_in_] = u_in_;
      dirty_revs_.clear();
      dirty_revs_.push_back(v_in_);
      while (stem != u_out_) {
        const int next_stem = parent_[stem];
        thread_[last] = next_stem;
        dirty_revs_.push_back(last);
        const int before = rev_thread_[stem];
        thread_[before] = after;
        rev_thread_[after] = before;
        parent_[stem] = par_stem;
        par_stem = stem;
        stem = next_stem;
        last = last_succ_[stem] == last_succ_[par_stem] ? rev_thread_[par_stem] : last_succ_[stem];
        after = thread_[last];
      }
      parent_[u_out_] = par_stem;
      thread_[last] = thread_continue;
      rev_thread_[thread_continue] = last;
      last_succ_[u_out_] = last;

      if (old_rev_thread != v_in_) {
        thread_[old_rev_thread] = after;
        rev_thread_[after] = old_rev_thread;
      }
      for (int u : dirty_revs_) rev_thread_[thread_[u]] = u;

      int tmp_sc = 0;
      const int tmp_ls = last_succ_[u_out_];
      for (int u = u_out_, p = parent_[u]; u != u_in_; u = p, p = parent_[u]) {
        pred_[u] = pred_[p];
        pred_dir_[u] = -pred_dir_[p];
        tmp_sc += succ_num_[u] - succ_num_[p];
        succ_num_[u] = tmp_sc;
        last_succ_[p] = tmp_ls;
      }
      pred_[u_in_] = in_arc_;
      pred_dir_[u_in_] = u_in_ == source_[in_arc_] ? kDirUp : kDirDown;
      succ_num_[u_in_] = old_succ_num;
    }

    const int up_limit_out = last_succ_[join_] == v_in_ ? join_ : -1;
    const int last_succ_out = last_succ_[u_out_];
    for (int u = v_in_; u != -1 && last_succ_[u] == v_in_; u = parent_[u]) last_succ_[u] = last_succ_out;

    if (join_ != old_rev_thread && v_in_ != old_rev_thread) {
      for (int u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u])
        last_succ_[u] = old_rev_thread;
    } else if (last_succ_out != old_last_succ) {
      for (int u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u])
        last_succ_[u] = last_succ_out;
    }

    for (int u = v_in_; u != join_; u = parent_[u]) succ_num_[u] += old_succ_num;
    for (int u = v_out_; u != join_; u = parent_[u]) succ_num_[u] -= old_succ_num;
  }

  void update_potential() {
    const double sigma = pi_[v_in_] - pi_[u_in_] - pred_dir_[u_in_] * cost_[in_arc_];
    const int end = thread_[last_succ_[u_in_]];
    for (int u = u_in_; u != end; u = thread_[u]) pi_[u] += sigma;
  }

  int n1_, n2_, node_num_;
  long arc_num_;
  int root_;

  std::vector<int> source_, target_;
  std::vector<double> cost_, flow_;
  std::vector<int> state_;

  std::vector<double> supply_, pi_;
  std::vector<int> parent_, thread_, rev_thread_, succ_num_, last_succ_, pred_dir_;
  std::vector<long> pred_;
  std::vector<int> dirty_revs_;

  long block_size_ = 10;
  long next_arc_ = 0;
  long in_arc_ = 0;
  int join_ = 0, u_in_ = 0, v_in_ = 0, u_out_ = 0, v_out_ = 0;
  double delta_ = 0.0;
};

}  // namespace monge::detail
