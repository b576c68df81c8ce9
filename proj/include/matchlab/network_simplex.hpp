#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "matchlab/error.hpp"

namespace matchlab {

// Primal network simplex for uncapacitated min-cost flow with real supplies.
//
// The initial basis hangs every node off an artificial root. Phase one prices
// the artificial arcs at a big-M cost; once no artificial arc carries flow the
// artificial arcs are frozen at capacity zero, potentials are recomputed from
// the real costs only, and pivoting continues. Arcs may be added after a run
// and run() called again to resume from the current basis (column
// generation). Entering arcs are chosen by block search; the leaving arc rule
// keeps the spanning tree strongly feasible.
//
// The spanning tree is stored as parent pointers plus a preorder thread with
// subtree sizes and last successors, so that potential updates walk a
// contiguous thread segment.
//
// Potentials follow the reduced-cost convention rc(u->v) = c + pi[u] - pi[v];
// dual() returns y = -pi so that y[u] - y[v] <= c on every arc at optimum.
class NetworkSimplex {
 public:
  enum class Status { Optimal, Infeasible };

  explicit NetworkSimplex(int node_count)
      : node_count_(node_count), supply_(static_cast<std::size_t>(std::max(node_count, 0)), 0.0) {
    if (node_count < 0) throw ArgumentError("negative node count");
  }

  int node_count() const { return node_count_; }
  int arc_count() const { return static_cast<int>(user_arc_ids_.size()); }

  void set_supply(int node, double supply) {
    if (initialized_) throw ArgumentError("supplies are fixed once the solver has run");
    supply_.at(static_cast<std::size_t>(node)) = supply;
  }

  // Upper bound on |cost| of every arc that will ever be added. Sizes the
  // big-M of phase one when arcs arrive after the first run.
  void set_cost_bound(double bound) { max_cost_ = std::max(max_cost_, std::abs(bound)); }

  // Adds an uncapacitated arc; returns its id (ids of user arcs are dense and
  // stable across resumes).
  int add_arc(int from, int to, double cost) {
    if (from < 0 || from >= node_count_ || to < 0 || to >= node_count_) {
      throw ArgumentError("arc endpoint out of range");
    }
    if (!std::isfinite(cost)) throw ArgumentError("arc cost must be finite");
    push_arc(from, to, cost, kLower);
    user_arc_ids_.push_back(static_cast<int>(source_.size()) - 1);
    max_cost_ = std::max(max_cost_, std::abs(cost));
    return static_cast<int>(user_arc_ids_.size()) - 1;
  }

  // Starts the first run from a feasible forest of user arcs instead of the
  // artificial star, skipping phase one. Each component hangs off the root
  // through a zero-capacity artificial arc and must balance its supplies;
  // tree flows are implied by the supplies. Zero-flow arcs should point away
  // from the lowest node of their component so the basis is strongly
  // feasible.
  void set_initial_forest(std::vector<int> arcs) {
    if (initialized_) throw ArgumentError("initial forest must be set before the first run");
    if (static_cast<int>(arcs.size()) >= std::max(node_count_, 1)) throw ArgumentError("initial forest has too many arcs");
    initial_tree_ = std::move(arcs);
    warm_ = true;
  }

  bool is_basic(int arc) const { return state_[internal(arc)] == kTree; }

  Status run() {
    if (!initialized_) {
      if (!warm_ || node_count_ < 1) {
        initialize();
      } else {
        initialize_from_tree();
      }
    }
    while (true) {
      pivot_until_optimal();
      if (phase_two_) break;
      if (artificial_flow() > flow_tolerance()) {
        status_ = Status::Infeasible;
        return status_;
      }
      enter_phase_two();
    }
    recompute_potentials();
    status_ = Status::Optimal;
    return status_;
  }

  Status status() const { return status_; }
  bool in_phase_two() const { return phase_two_; }

  double flow(int arc) const { return flow_[internal(arc)]; }
  int arc_source(int arc) const { return source_[internal(arc)]; }
  int arc_target(int arc) const { return target_[internal(arc)]; }
  double arc_cost(int arc) const { return cost_[internal(arc)]; }

  // Dual value y with y[u] - y[v] <= c(u,v), tight on basic arcs.
  double dual(int node) const { return -pi_.at(static_cast<std::size_t>(node)); }

  // Reduced cost c + pi[u] - pi[v] of a hypothetical arc, for pricing.
  double reduced_cost(int from, int to, double cost) const {
    return cost + pi_[static_cast<std::size_t>(from)] - pi_[static_cast<std::size_t>(to)];
  }

  double total_cost() const {
    double s = 0.0;
    for (int id : user_arc_ids_) s += flow_[static_cast<std::size_t>(id)] * cost_[static_cast<std::size_t>(id)];
    return s;
  }

  // Tolerance used for "reduced cost < 0" decisions in the current phase.
  double reduced_cost_tolerance() const {
    const double scale = phase_two_ ? max_cost_ : art_cost_;
    return 1e-12 * std::max(scale, 1e-300);
  }

  std::int64_t pivot_count() const { return pivots_; }

 private:
  static constexpr signed char kTree = 0;
  static constexpr signed char kLower = 1;
  static constexpr signed char kFrozen = 2;
  static constexpr signed char kUp = 1;     // pred arc runs node -> parent
  static constexpr signed char kDown = -1;  // pred arc runs parent -> node

  std::size_t internal(int arc) const {
    return static_cast<std::size_t>(user_arc_ids_.at(static_cast<std::size_t>(arc)));
  }

  void push_arc(int from, int to, double cost, signed char state) {
    source_.push_back(from);
    target_.push_back(to);
    cost_.push_back(cost);
    flow_.push_back(0.0);
    state_.push_back(state);
    artificial_.push_back(0);
  }

  double flow_tolerance() const {
    double total = 0.0;
    for (double s : supply_) total += std::abs(s);
    return 1e-12 * std::max(total, 1e-300);
  }

  double artificial_flow() const {
    double s = 0.0;
    for (std::size_t e = 0; e < flow_.size(); ++e) {
      if (artificial_[e]) s += flow_[e];
    }
    return s;
  }

  void allocate_tree() {
    initialized_ = true;
    root_ = node_count_;
    const std::size_t nn = static_cast<std::size_t>(node_count_) + 1;
    parent_.assign(nn, -1);
    pred_.assign(nn, -1);
    pred_dir_.assign(nn, kUp);
    thread_.assign(nn, root_);
    rev_thread_.assign(nn, root_);
    succ_num_.assign(nn, 1);
    last_succ_.assign(nn, -1);
    pi_.assign(nn, 0.0);
    art_cost_ = (max_cost_ + 1.0) * static_cast<double>(node_count_ + 1);
  }

  void initialize() {
    allocate_tree();
    const int n = node_count_;
    const auto root = static_cast<std::size_t>(root_);
    thread_[root] = n > 0 ? 0 : root_;
    rev_thread_[root] = n > 0 ? n - 1 : root_;
    succ_num_[root] = n + 1;
    last_succ_[root] = n > 0 ? n - 1 : root_;
    for (int u = 0; u < n; ++u) {
      const auto uu = static_cast<std::size_t>(u);
      const double s = supply_[uu];
      if (s >= 0.0) {
        push_arc(u, root_, 0.0, kTree);
        flow_.back() = s;
        pred_dir_[uu] = kUp;
        pi_[uu] = 0.0;
      } else {
        push_arc(root_, u, art_cost_, kTree);
        flow_.back() = -s;
        pred_dir_[uu] = kDown;
        pi_[uu] = art_cost_;
      }
      artificial_.back() = 1;
      parent_[uu] = root_;
      pred_[uu] = static_cast<int>(source_.size()) - 1;
      thread_[uu] = u + 1 < n ? u + 1 : root_;
      rev_thread_[uu] = u > 0 ? u - 1 : root_;
      succ_num_[uu] = 1;
      last_succ_[uu] = u;
    }
  }

  void initialize_from_tree() {
    allocate_tree();
    phase_two_ = true;
    const int n = node_count_;

    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (int a : initial_tree_) {
      const std::size_t e = internal(a);
      adj[static_cast<std::size_t>(source_[e])].push_back(static_cast<int>(e));
      adj[static_cast<std::size_t>(target_[e])].push_back(static_cast<int>(e));
    }

    // Preorder of every component, each under its own root arc, gives the
    // thread.
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(n));
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<int> stack;
    for (int r = 0; r < n; ++r) {
      if (seen[static_cast<std::size_t>(r)]) continue;
      push_arc(r, root_, 0.0, kTree);
      artificial_.back() = 1;
      const auto rr = static_cast<std::size_t>(r);
      seen[rr] = 1;
      parent_[rr] = root_;
      pred_[rr] = static_cast<int>(source_.size()) - 1;
      pred_dir_[rr] = kUp;
      stack.assign(1, r);
      while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        order.push_back(u);
        const auto& edges = adj[static_cast<std::size_t>(u)];
        for (auto it = edges.rbegin(); it != edges.rend(); ++it) {
          const auto e = static_cast<std::size_t>(*it);
          const int v = source_[e] == u ? target_[e] : source_[e];
          const auto vv = static_cast<std::size_t>(v);
          if (seen[vv]) {
            if (parent_[vv] != u || pred_[vv] != static_cast<int>(e)) {
              if (state_[e] != kTree) throw ArgumentError("initial forest contains a cycle");
            }
            continue;
          }
          seen[vv] = 1;
          parent_[vv] = u;
          pred_[vv] = static_cast<int>(e);
          pred_dir_[vv] = source_[e] == v ? kUp : kDown;
          state_[e] = kTree;
          stack.push_back(v);
        }
      }
    }

    int prev = root_;
    for (int u : order) {
      thread_[static_cast<std::size_t>(prev)] = u;
      rev_thread_[static_cast<std::size_t>(u)] = prev;
      prev = u;
    }
    thread_[static_cast<std::size_t>(prev)] = root_;
    rev_thread_[static_cast<std::size_t>(root_)] = prev;
    succ_num_[static_cast<std::size_t>(root_)] = n + 1;
    last_succ_[static_cast<std::size_t>(root_)] = prev;

    // Leaf-to-root accumulation of subtree supplies gives the tree flows.
    const double tol = flow_tolerance();
    std::vector<double> excess(supply_);
    for (int u : order) last_succ_[static_cast<std::size_t>(u)] = u;
    for (std::size_t k = order.size(); k-- > 0;) {
      const int u = order[k];
      const auto uu = static_cast<std::size_t>(u);
      const auto e = static_cast<std::size_t>(pred_[uu]);
      const int p = parent_[uu];
      if (p == root_) {
        if (std::abs(excess[uu]) > tol) throw ArgumentError("initial forest component does not balance");
        flow_[e] = 0.0;
        continue;
      }
      const double f = pred_dir_[uu] == kUp ? excess[uu] : -excess[uu];
      if (f < -tol) throw ArgumentError("initial forest is not primal feasible");
      flow_[e] = std::max(f, 0.0);
      const auto pp = static_cast<std::size_t>(p);
      excess[pp] += excess[uu];
      succ_num_[pp] += succ_num_[uu];
      if (last_succ_[pp] == p) last_succ_[pp] = last_succ_[uu];
    }
    recompute_potentials();
  }

  void enter_phase_two() {
    phase_two_ = true;
    for (std::size_t e = 0; e < source_.size(); ++e) {
      if (!artificial_[e]) continue;
      cost_[e] = 0.0;
      flow_[e] = 0.0;
      if (state_[e] != kTree) state_[e] = kFrozen;
    }
    recompute_potentials();
  }

  void recompute_potentials() {
    pi_[static_cast<std::size_t>(root_)] = 0.0;
    for (int u = thread_[static_cast<std::size_t>(root_)]; u != root_; u = thread_[static_cast<std::size_t>(u)]) {
      const auto uu = static_cast<std::size_t>(u);
      const double c = cost_[static_cast<std::size_t>(pred_[uu])];
      // Tree arcs have zero reduced cost.
      pi_[uu] = pi_[static_cast<std::size_t>(parent_[uu])] - pred_dir_[uu] * c;
    }
  }

  // Block search pricing: most negative reduced cost within the first block
  // that contains a violation.
  int find_entering_arc(double eps) {
    const std::size_t m = source_.size();
    if (m == 0) return -1;
    const std::size_t block =
        std::max<std::size_t>(10, static_cast<std::size_t>(std::sqrt(static_cast<double>(m))));
    double best = -eps;
    int best_arc = -1;
    std::size_t counted = 0;
    std::size_t e = next_arc_ % m;
    for (std::size_t scanned = 0; scanned < m; ++scanned) {
      if (state_[e] == kLower) {
        const double rc = cost_[e] + pi_[static_cast<std::size_t>(source_[e])] -
                          pi_[static_cast<std::size_t>(target_[e])];
        if (rc < best) {
          best = rc;
          best_arc = static_cast<int>(e);
        }
      }
      if (++counted == block) {
        if (best_arc >= 0) {
          next_arc_ = e + 1;
          return best_arc;
        }
        counted = 0;
      }
      if (++e == m) e = 0;
    }
    next_arc_ = e;
    return best_arc;
  }

  int find_join(int u, int v) const {
    while (u != v) {
      if (succ_num_[static_cast<std::size_t>(u)] < succ_num_[static_cast<std::size_t>(v)]) {
        u = parent_[static_cast<std::size_t>(u)];
      } else {
        v = parent_[static_cast<std::size_t>(v)];
      }
    }
    return u;
  }

  // Residual capacity of the tree arc above u when flow is pushed towards
  // the parent (up == true) or away from it.
  double residual(int u, bool up_direction) const {
    const auto uu = static_cast<std::size_t>(u);
    const auto e = static_cast<std::size_t>(pred_[uu]);
    const bool increases = (pred_dir_[uu] == kUp) == up_direction;
    if (increases) {
      if (phase_two_ && artificial_[e]) return 0.0;
      return std::numeric_limits<double>::infinity();
    }
    return flow_[e];
  }

  void pivot_until_optimal() {
    while (true) {
      const double eps = reduced_cost_tolerance();
      const int in_arc = find_entering_arc(eps);
      if (in_arc < 0) return;
      pivot(in_arc);
      ++pivots_;
    }
  }

  void pivot(int in_arc) {
    const auto ia = static_cast<std::size_t>(in_arc);
    const int first = source_[ia];
    const int second = target_[ia];
    const int join = find_join(first, second);

    // Flow circulates first -> second along the entering arc, up from second
    // to join, then down from join to first.
    double delta = std::numeric_limits<double>::infinity();
    int u_out = -1;
    bool out_on_first_side = false;
    for (int u = first; u != join; u = parent_[static_cast<std::size_t>(u)]) {
      const double d = residual(u, false);
      if (d < delta) {
        delta = d;
        u_out = u;
        out_on_first_side = true;
      }
    }
    for (int u = second; u != join; u = parent_[static_cast<std::size_t>(u)]) {
      const double d = residual(u, true);
      if (d <= delta) {
        delta = d;
        u_out = u;
        out_on_first_side = false;
      }
    }
    if (u_out < 0) throw SolverRefusal("network simplex: unbounded negative cycle");

    if (delta > 0.0) {
      flow_[ia] += delta;
      for (int u = first; u != join; u = parent_[static_cast<std::size_t>(u)]) {
        const auto uu = static_cast<std::size_t>(u);
        flow_[static_cast<std::size_t>(pred_[uu])] -= pred_dir_[uu] * delta;
      }
      for (int u = second; u != join; u = parent_[static_cast<std::size_t>(u)]) {
        const auto uu = static_cast<std::size_t>(u);
        flow_[static_cast<std::size_t>(pred_[uu])] += pred_dir_[uu] * delta;
      }
    }

    const auto out_arc = static_cast<std::size_t>(pred_[static_cast<std::size_t>(u_out)]);
    flow_[out_arc] = 0.0;
    state_[out_arc] = (artificial_[out_arc] && phase_two_) ? kFrozen : kLower;
    state_[ia] = kTree;

    // u_in is the entering endpoint inside the subtree cut off below u_out.
    const int u_in = out_on_first_side ? first : second;
    const int v_in = out_on_first_side ? second : first;
    update_tree(in_arc, join, u_in, v_in, u_out);

    const auto ui = static_cast<std::size_t>(u_in);
    const double sigma = pi_[static_cast<std::size_t>(v_in)] - pi_[ui] - pred_dir_[ui] * cost_[ia];
    const int end = thread_[static_cast<std::size_t>(last_succ_[ui])];
    for (int u = u_in; u != end; u = thread_[static_cast<std::size_t>(u)]) pi_[static_cast<std::size_t>(u)] += sigma;
  }

  // Re-hangs the subtree of u_out from v_in through the stem u_in .. u_out,
  // maintaining parent, pred, thread, subtree sizes and last successors.
  void update_tree(int in_arc, int join, int u_in, int v_in, int u_out) {
    auto at = [](std::vector<int>& a, int i) -> int& { return a[static_cast<std::size_t>(i)]; };
    const int old_rev_thread = at(rev_thread_, u_out);
    const int old_succ_num = at(succ_num_, u_out);
    const int old_last_succ = at(last_succ_, u_out);
    const int v_out = at(parent_, u_out);

    if (u_in == u_out) {
      at(parent_, u_in) = v_in;
      at(pred_, u_in) = in_arc;
      pred_dir_[static_cast<std::size_t>(u_in)] = u_in == source_[static_cast<std::size_t>(in_arc)] ? kUp : kDown;
      if (at(thread_, v_in) != u_out) {
        int after = at(thread_, old_last_succ);
        at(thread_, old_rev_thread) = after;
        at(rev_thread_, after) = old_rev_thread;
        after = at(thread_, v_in);
        at(thread_, v_in) = u_out;
        at(rev_thread_, u_out) = v_in;
        at(thread_, old_last_succ) = after;
        at(rev_thread_, after) = old_last_succ;
      }
    } else {
      const int thread_continue = old_rev_thread == v_in ? at(thread_, old_last_succ) : at(thread_, v_in);
      int stem = u_in;
      int par_stem = v_in;
      int last = at(last_succ_, u_in);
      int after = at(thread_, last);
      at(thread_, v_in) = u_in;
      dirty_revs_.clear();
      dirty_revs_.push_back(v_in);
      while (stem != u_out) {
        const int next_stem = at(parent_, stem);
        at(thread_, last) = next_stem;
        dirty_revs_.push_back(last);
        const int before = at(rev_thread_, stem);
        at(thread_, before) = after;
        at(rev_thread_, after) = before;
        at(parent_, stem) = par_stem;
        par_stem = stem;
        stem = next_stem;
        last = at(last_succ_, stem) == at(last_succ_, par_stem) ? at(rev_thread_, par_stem) : at(last_succ_, stem);
        after = at(thread_, last);
      }
      at(parent_, u_out) = par_stem;
      at(thread_, last) = thread_continue;
      at(rev_thread_, thread_continue) = last;
      at(last_succ_, u_out) = last;
      if (old_rev_thread != v_in) {
        at(thread_, old_rev_thread) = after;
        at(rev_thread_, after) = old_rev_thread;
      }
      for (int u : dirty_revs_) at(rev_thread_, at(thread_, u)) = u;

      int tmp_sc = 0;
      const int tmp_ls = at(last_succ_, u_out);
      for (int u = u_out, p = at(parent_, u); u != u_in; u = p, p = at(parent_, u)) {
        at(pred_, u) = at(pred_, p);
        pred_dir_[static_cast<std::size_t>(u)] = static_cast<signed char>(-pred_dir_[static_cast<std::size_t>(p)]);
        tmp_sc += at(succ_num_, u) - at(succ_num_, p);
        at(succ_num_, u) = tmp_sc;
        at(last_succ_, p) = tmp_ls;
      }
      at(pred_, u_in) = in_arc;
      pred_dir_[static_cast<std::size_t>(u_in)] = u_in == source_[static_cast<std::size_t>(in_arc)] ? kUp : kDown;
      at(succ_num_, u_in) = old_succ_num;
    }

    const int up_limit_out = at(last_succ_, join) == v_in ? join : -1;
    const int last_succ_out = at(last_succ_, u_out);
    for (int u = v_in; u != -1 && at(last_succ_, u) == v_in; u = at(parent_, u)) at(last_succ_, u) = last_succ_out;

    if (join != old_rev_thread && v_in != old_rev_thread) {
      for (int u = v_out; u != up_limit_out && at(last_succ_, u) == old_last_succ; u = at(parent_, u)) {
        at(last_succ_, u) = old_rev_thread;
      }
    } else if (last_succ_out != old_last_succ) {
      for (int u = v_out; u != up_limit_out && at(last_succ_, u) == old_last_succ; u = at(parent_, u)) {
        at(last_succ_, u) = last_succ_out;
      }
    }

    for (int u = v_in; u != join; u = at(parent_, u)) at(succ_num_, u) += old_succ_num;
    for (int u = v_out; u != join; u = at(parent_, u)) at(succ_num_, u) -= old_succ_num;
  }

  int node_count_;
  std::vector<double> supply_;

  std::vector<int> source_;
  std::vector<int> target_;
  std::vector<double> cost_;
  std::vector<double> flow_;
  std::vector<signed char> state_;
  std::vector<char> artificial_;
  std::vector<int> user_arc_ids_;

  std::vector<int> parent_;
  std::vector<int> pred_;
  std::vector<signed char> pred_dir_;
  std::vector<int> thread_;
  std::vector<int> rev_thread_;
  std::vector<int> succ_num_;
  std::vector<int> last_succ_;
  std::vector<double> pi_;
  std::vector<int> dirty_revs_;
  std::vector<int> initial_tree_;

  int root_ = -1;
  double max_cost_ = 0.0;
  double art_cost_ = 1.0;
  bool initialized_ = false;
  bool phase_two_ = false;
  bool warm_ = false;
  std::size_t next_arc_ = 0;
  std::int64_t pivots_ = 0;
  Status status_ = Status::Infeasible;
};

}  // namespace matchlab
