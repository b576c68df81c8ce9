#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "matchlab/assignment.hpp"
#include "matchlab/density.hpp"
#include "matchlab/error.hpp"
#include "matchlab/geometry.hpp"
#include "matchlab/hilbert.hpp"
#include "matchlab/network_simplex.hpp"
#include "matchlab/spatial_index.hpp"

namespace matchlab {

// Sentinel index for the boundary pseudo-nodes of the Wb reduction ("B" on
// the source side, "B'" on the target side).
inline constexpr int kBoundary = -1;

struct Atom {
  Point point;
  double mass = 0.0;
};

class AtomicMeasure {
 public:
  AtomicMeasure() = default;

  explicit AtomicMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
    for (const Atom& a : atoms_) {
      if (!(a.mass > 0.0) || !std::isfinite(a.mass)) throw ArgumentError("atom masses must be positive and finite");
      if (!std::isfinite(a.point.x) || !std::isfinite(a.point.y)) throw ArgumentError("atom position is not finite");
    }
  }

  // (total / n) sum_i delta_{x_i}
  static AtomicMeasure uniform(std::span<const Point> points, double total = 1.0) {
    std::vector<Atom> atoms;
    atoms.reserve(points.size());
    const double w = points.empty() ? 0.0 : total / static_cast<double>(points.size());
    for (Point p : points) atoms.push_back({p, w});
    return AtomicMeasure(std::move(atoms));
  }

  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  const Atom& operator[](std::size_t i) const { return atoms_[i]; }
  const std::vector<Atom>& atoms() const { return atoms_; }

  double total_mass() const {
    double s = 0.0;
    for (const Atom& a : atoms_) s += a.mass;
    return s;
  }

  std::vector<Point> points() const {
    std::vector<Point> out;
    out.reserve(atoms_.size());
    for (const Atom& a : atoms_) out.push_back(a.point);
    return out;
  }

  AtomicMeasure scaled(double factor) const {
    std::vector<Atom> out(atoms_);
    for (Atom& a : out) a.mass *= factor;
    return AtomicMeasure(std::move(out));
  }

 private:
  std::vector<Atom> atoms_;
};

struct PlanEntry {
  int source = 0;  // atom index of mu, or kBoundary
  int target = 0;  // atom index of nu, or kBoundary
  double mass = 0.0;
  double leg_cost = 0.0;  // |x - y|^p, or d(., boundary)^p for boundary legs
};

// Optimal coupling with the dual certificate. For the boundary variant the
// duals of the boundary pseudo-nodes are normalized to zero, so dual_f and
// dual_g satisfy f_i <= d(x_i)^p and g_j <= d(y_j)^p in addition to
// f_i + g_j <= |x_i - y_j|^p.
struct TransportPlan {
  std::vector<PlanEntry> entries;
  double p = 2.0;
  double total_cost = 0.0;
  std::vector<double> dual_f;
  std::vector<double> dual_g;
  bool boundary_variant = false;
  std::vector<Point> source_points;
  std::vector<Point> target_points;
  // Nearest boundary point of every atom (boundary variant only).
  std::vector<Point> source_exits;
  std::vector<Point> target_exits;
  std::int64_t pivots = 0;
  int pricing_rounds = 0;

  double dual_objective(const AtomicMeasure& mu, const AtomicMeasure& nu) const {
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) s += mu[i].mass * dual_f[i];
    for (std::size_t j = 0; j < nu.size(); ++j) s += nu[j].mass * dual_g[j];
    return s;
  }
};

struct TransportOptions {
  // Instances with at most this many source-target pairs use the complete
  // bipartite graph; larger ones start from nearest-neighbour arcs and add
  // violated arcs by exhaustive pricing until the duals certify optimality.
  std::size_t dense_pair_limit = std::size_t{1} << 20;
  std::size_t neighbours = 8;
  std::size_t arcs_per_node_per_round = 4;
  bool multiscale = true;
};

namespace detail {

struct BipartiteFlowInput {
  std::span<const Point> xs;
  std::span<const double> mass_x;
  std::span<const Point> ys;
  std::span<const double> mass_y;
  double p = 2.0;
  // Boundary variant: per-atom exit costs d(., boundary)^p.
  std::optional<std::span<const double>> exit_x;
  std::optional<std::span<const double>> exit_y;
  // Optional feasible forest (pairs of atom indices or kBoundary) to start
  // from instead of the Hilbert staircase.
  std::vector<std::pair<int, int>> warm_basis;
};

struct BipartiteFlowOutput {
  std::vector<PlanEntry> entries;
  std::vector<double> f;
  std::vector<double> g;
  double total_cost = 0.0;
  std::vector<PlanEntry> basis;  // final spanning-forest arcs, zero flows included
  std::int64_t pivots = 0;
  int rounds = 0;
};

// Source atoms bucketed on a uniform grid with the largest dual per bucket.
// visit(q, floor, p, f) calls f(i) for every source whose bucket could hold
// |x_i - q|^p < y_i - floor, a superset of the violated arcs into q.
class DualBuckets {
 public:
  DualBuckets(std::span<const Point> xs, std::span<const double> y) : xs_(xs) {
    if (xs.empty()) return;
    box_ = {xs.front(), xs.front()};
    for (Point p : xs) {
      box_.lo.x = std::min(box_.lo.x, p.x);
      box_.lo.y = std::min(box_.lo.y, p.y);
      box_.hi.x = std::max(box_.hi.x, p.x);
      box_.hi.y = std::max(box_.hi.y, p.y);
    }
    const double w = std::max(box_.width(), 1e-12);
    const double h = std::max(box_.height(), 1e-12);
    cell_ = std::sqrt(w * h / std::max(1.0, static_cast<double>(xs.size()) / 4.0));
    nx_ = std::max(1, static_cast<int>(std::ceil(w / cell_)));
    ny_ = std::max(1, static_cast<int>(std::ceil(h / cell_)));
    const auto cells = static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_);
    start_.assign(cells + 1, 0);
    top_.assign(cells, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const std::size_t c = cell_of(xs[i]);
      ++start_[c + 1];
      top_[c] = std::max(top_[c], y[i]);
      top_all_ = std::max(top_all_, y[i]);
    }
    for (std::size_t c = 1; c < start_.size(); ++c) start_[c] += start_[c - 1];
    order_.resize(xs.size());
    std::vector<int> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < xs.size(); ++i) order_[static_cast<std::size_t>(fill[cell_of(xs[i])]++)] = static_cast<int>(i);
  }

  template <class F>
  void visit(Point q, double floor, double p, F&& f) const {
    if (order_.empty()) return;
    const double slack = top_all_ - floor;
    if (!(slack > 0.0)) return;
    const double reach = std::pow(slack, 1.0 / p) * (1.0 + 1e-9);
    const int gx0 = std::clamp(static_cast<int>(std::floor((q.x - reach - box_.lo.x) / cell_)), 0, nx_ - 1);
    const int gx1 = std::clamp(static_cast<int>(std::floor((q.x + reach - box_.lo.x) / cell_)), 0, nx_ - 1);
    const int gy0 = std::clamp(static_cast<int>(std::floor((q.y - reach - box_.lo.y) / cell_)), 0, ny_ - 1);
    const int gy1 = std::clamp(static_cast<int>(std::floor((q.y + reach - box_.lo.y) / cell_)), 0, ny_ - 1);
    for (int gy = gy0; gy <= gy1; ++gy) {
      for (int gx = gx0; gx <= gx1; ++gx) {
        const auto c = static_cast<std::size_t>(gy) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(gx);
        if (start_[c] == start_[c + 1]) continue;
        const double room = top_[c] - floor;
        if (!(room > 0.0)) continue;
        // Bucket extents are closed on the grid lines; boundary buckets also
        // hold clamped points, which stay inside the bounding box.
        const double cx0 = box_.lo.x + gx * cell_;
        const double cy0 = box_.lo.y + gy * cell_;
        const double dx = std::max({cx0 - q.x, 0.0, q.x - (cx0 + cell_)});
        const double dy = std::max({cy0 - q.y, 0.0, q.y - (cy0 + cell_)});
        if (length_pow(std::hypot(dx, dy), p) > room * (1.0 + 1e-9)) continue;
        for (int s = start_[c]; s < start_[c + 1]; ++s) f(order_[static_cast<std::size_t>(s)]);
      }
    }
  }

 private:
  std::size_t cell_of(Point p) const {
    const int gx = std::clamp(static_cast<int>((p.x - box_.lo.x) / cell_), 0, nx_ - 1);
    const int gy = std::clamp(static_cast<int>((p.y - box_.lo.y) / cell_), 0, ny_ - 1);
    return static_cast<std::size_t>(gy) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(gx);
  }

  std::span<const Point> xs_;
  Box box_{};
  double cell_ = 1.0;
  int nx_ = 1;
  int ny_ = 1;
  double top_all_ = -std::numeric_limits<double>::infinity();
  std::vector<int> start_;
  std::vector<int> order_;
  std::vector<double> top_;
};

// North-west corner rule: a staircase of ns + nd - 1 arcs carrying the
// supplies to the demands in list order. When a supply and a demand run out
// together the degenerate arc goes from the current supply to the next
// demand. Leftovers caused by rounding attach to the last element.
inline void north_west_corner(std::span<const int> sup, std::span<const double> sup_mass, std::span<const int> dem,
                              std::span<const double> dem_mass, std::vector<std::pair<int, int>>& out) {
  const std::size_t ns = sup.size();
  const std::size_t nd = dem.size();
  if (ns == 0 || nd == 0) return;
  double total = 0.0;
  for (double v : sup_mass) total += v;
  const double tol = 1e-12 * total;
  std::size_t i = 0, j = 0;
  double ra = sup_mass[0], rb = dem_mass[0];
  while (true) {
    out.emplace_back(sup[i], dem[j]);
    if (i + 1 == ns && j + 1 == nd) break;
    if (i + 1 == ns) {
      ++j;
    } else if (j + 1 == nd) {
      ++i;
    } else if (std::abs(ra - rb) <= tol) {
      out.emplace_back(sup[i], dem[j + 1]);
      ra = sup_mass[++i];
      rb = dem_mass[++j];
    } else if (ra < rb) {
      rb -= ra;
      ra = sup_mass[++i];
    } else {
      ra -= rb;
      rb = dem_mass[++j];
    }
  }
}

// Feasible spanning tree joining spatially close atoms: the north-west corner
// rule along the Hilbert order of both sides. Supplies are the X atoms (then
// B), demands the Y atoms (then B').
inline std::vector<std::pair<int, int>> staircase_pairs(const BipartiteFlowInput& in, bool boundary) {
  std::vector<Point> all(in.xs.begin(), in.xs.end());
  all.insert(all.end(), in.ys.begin(), in.ys.end());
  const Box square = bounding_square(all);
  std::vector<int> sup = hilbert_sort(in.xs, square);
  std::vector<int> dem = hilbert_sort(in.ys, square);
  std::vector<double> sup_mass, dem_mass;
  for (int i : sup) sup_mass.push_back(in.mass_x[static_cast<std::size_t>(i)]);
  for (int j : dem) dem_mass.push_back(in.mass_y[static_cast<std::size_t>(j)]);
  if (boundary) {
    double sx = 0.0, sy = 0.0;
    for (double v : sup_mass) sx += v;
    for (double v : dem_mass) sy += v;
    sup.push_back(kBoundary);
    sup_mass.push_back(sy);
    dem.push_back(kBoundary);
    dem_mass.push_back(sx);
  }
  std::vector<std::pair<int, int>> out;
  north_west_corner(sup, sup_mass, dem, dem_mass, out);
  return out;
}

// Targets merged four at a time along the Hilbert order.
struct CoarseTargets {
  std::vector<Point> ys;
  std::vector<double> mass;
  std::vector<double> exit;
  std::vector<std::vector<int>> members;
};

inline CoarseTargets coarsen_targets(const BipartiteFlowInput& in) {
  CoarseTargets c;
  const std::vector<int> order = hilbert_sort(in.ys);
  for (std::size_t k = 0; k < order.size(); k += 4) {
    std::vector<int> group(order.begin() + static_cast<std::ptrdiff_t>(k),
                           order.begin() + static_cast<std::ptrdiff_t>(std::min(k + 4, order.size())));
    double w = 0.0, ex = 0.0;
    Point centre{0.0, 0.0};
    for (int j : group) {
      const double mj = in.mass_y[static_cast<std::size_t>(j)];
      w += mj;
      centre = centre + mj * in.ys[static_cast<std::size_t>(j)];
      if (in.exit_y) ex += mj * (*in.exit_y)[static_cast<std::size_t>(j)];
    }
    c.ys.push_back((1.0 / w) * centre);
    c.mass.push_back(w);
    c.exit.push_back(ex / w);
    c.members.push_back(std::move(group));
  }
  return c;
}

// Splits every coarse target of an optimal coarse basis into its members by
// a north-west corner between the coarse arcs entering it and the members.
inline std::vector<std::pair<int, int>> refine_basis(const BipartiteFlowInput& in, const CoarseTargets& coarse,
                                                     const std::vector<PlanEntry>& basis) {
  std::vector<std::pair<int, int>> out;
  std::vector<std::vector<std::pair<int, double>>> into(coarse.ys.size());
  for (const PlanEntry& e : basis) {
    if (e.target == kBoundary) {
      out.emplace_back(e.source, e.target);
    } else {
      into[static_cast<std::size_t>(e.target)].emplace_back(e.source, e.mass);
    }
  }
  std::vector<int> sup, dem;
  std::vector<double> sup_mass, dem_mass;
  for (std::size_t c = 0; c < coarse.ys.size(); ++c) {
    auto& arcs = into[c];
    std::sort(arcs.begin(), arcs.end());
    sup.clear();
    sup_mass.clear();
    dem.clear();
    dem_mass.clear();
    for (auto [s, f] : arcs) {
      sup.push_back(s);
      sup_mass.push_back(f);
    }
    for (int j : coarse.members[c]) {
      dem.push_back(j);
      dem_mass.push_back(in.mass_y[static_cast<std::size_t>(j)]);
    }
    north_west_corner(sup, sup_mass, dem, dem_mass, out);
  }
  return out;
}

// Exact transportation (optionally with boundary pseudo-nodes B -> Y,
// X -> B', B -> B') by network simplex with exhaustive dual pricing.
inline BipartiteFlowOutput solve_bipartite_level(const BipartiteFlowInput& in, const TransportOptions& opt) {
  const int n = static_cast<int>(in.xs.size());
  const int m = static_cast<int>(in.ys.size());
  const bool boundary = in.exit_x.has_value();
  const int node_b = n + m;
  const int node_b_prime = n + m + 1;
  NetworkSimplex ns(boundary ? n + m + 2 : n + m);

  double sum_x = 0.0;
  double sum_y = 0.0;
  for (int i = 0; i < n; ++i) {
    ns.set_supply(i, in.mass_x[static_cast<std::size_t>(i)]);
    sum_x += in.mass_x[static_cast<std::size_t>(i)];
  }
  for (int j = 0; j < m; ++j) {
    ns.set_supply(n + j, -in.mass_y[static_cast<std::size_t>(j)]);
    sum_y += in.mass_y[static_cast<std::size_t>(j)];
  }

  // Cost bound for the phase-one big-M.
  double max_cost = 0.0;
  {
    Box bx{{0, 0}, {0, 0}};
    bool first = true;
    for (auto pts : {in.xs, in.ys}) {
      for (Point q : pts) {
        if (first) {
          bx = {q, q};
          first = false;
        }
        bx.lo.x = std::min(bx.lo.x, q.x);
        bx.lo.y = std::min(bx.lo.y, q.y);
        bx.hi.x = std::max(bx.hi.x, q.x);
        bx.hi.y = std::max(bx.hi.y, q.y);
      }
    }
    max_cost = length_pow(bx.diameter(), in.p);
  }

  std::vector<std::pair<int, int>> arc_pair;
  const auto add_pair = [&](int i, int j) {
    const double c = cost_pow(in.xs[static_cast<std::size_t>(i)], in.ys[static_cast<std::size_t>(j)], in.p);
    ns.add_arc(i, n + j, c);
    arc_pair.emplace_back(i, j);
  };

  if (boundary) {
    ns.set_supply(node_b, sum_y);
    ns.set_supply(node_b_prime, -sum_x);
    for (int i = 0; i < n; ++i) {
      max_cost = std::max(max_cost, (*in.exit_x)[static_cast<std::size_t>(i)]);
      ns.add_arc(i, node_b_prime, (*in.exit_x)[static_cast<std::size_t>(i)]);
      arc_pair.emplace_back(i, kBoundary);
    }
    for (int j = 0; j < m; ++j) {
      max_cost = std::max(max_cost, (*in.exit_y)[static_cast<std::size_t>(j)]);
      ns.add_arc(node_b, n + j, (*in.exit_y)[static_cast<std::size_t>(j)]);
      arc_pair.emplace_back(kBoundary, j);
    }
    ns.add_arc(node_b, node_b_prime, 0.0);
    arc_pair.emplace_back(kBoundary, kBoundary);
  }
  ns.set_cost_bound(max_cost);

  const std::size_t pairs = static_cast<std::size_t>(n) * static_cast<std::size_t>(m);
  const bool dense = pairs <= opt.dense_pair_limit;
  const std::vector<std::pair<int, int>> start = in.warm_basis.empty() ? staircase_pairs(in, boundary) : in.warm_basis;
  std::vector<std::pair<int, int>> cand;
  if (dense) {
    cand.reserve(pairs);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) cand.emplace_back(i, j);
    }
  } else if (n > 0 && m > 0) {
    const GridIndex index_x(in.xs);
    const GridIndex index_y(in.ys);
    for (int j = 0; j < m; ++j) {
      for (int i : index_x.nearest(in.ys[static_cast<std::size_t>(j)], opt.neighbours)) cand.emplace_back(i, j);
    }
    for (int i = 0; i < n; ++i) {
      for (int j : index_y.nearest(in.xs[static_cast<std::size_t>(i)], opt.neighbours)) cand.emplace_back(i, j);
    }
    for (auto [i, j] : start) {
      if (i != kBoundary && j != kBoundary) cand.emplace_back(i, j);
    }
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  }
  const int first_pair_arc = ns.arc_count();
  for (auto [i, j] : cand) add_pair(i, j);

  if (!start.empty() && static_cast<int>(start.size()) < ns.node_count()) {
    std::vector<int> tree;
    tree.reserve(start.size());
    for (auto [i, j] : start) {
      if (i == kBoundary && j == kBoundary) {
        tree.push_back(n + m);
      } else if (j == kBoundary) {
        tree.push_back(i);
      } else if (i == kBoundary) {
        tree.push_back(n + j);
      } else {
        const auto it = std::lower_bound(cand.begin(), cand.end(), std::pair(i, j));
        tree.push_back(first_pair_arc + static_cast<int>(it - cand.begin()));
      }
    }
    ns.set_initial_forest(std::move(tree));
  }

  BipartiteFlowOutput out;
  std::vector<double> y(static_cast<std::size_t>(ns.node_count()));
  while (true) {
    ns.run();
    ++out.rounds;
    if (dense && ns.status() == NetworkSimplex::Status::Optimal) break;
    if (dense) throw ArgumentError("transport problem is infeasible (unbalanced masses?)");
    // Pricing over all pairs against the current duals; buckets whose
    // nearest possible cost already exceeds their largest dual are skipped.
    for (int u = 0; u < ns.node_count(); ++u) y[static_cast<std::size_t>(u)] = ns.dual(u);
    const double eps = ns.reduced_cost_tolerance();
    const std::size_t keep = opt.arcs_per_node_per_round;
    const DualBuckets buckets(in.xs, y);
    std::vector<std::pair<double, int>> best;
    std::vector<std::pair<int, int>> additions;
    for (int j = 0; j < m; ++j) {
      best.clear();
      const Point yj = in.ys[static_cast<std::size_t>(j)];
      const double yv = y[static_cast<std::size_t>(n + j)];
      buckets.visit(yj, yv + eps, in.p, [&](int i) {
        const double rc = cost_pow(in.xs[static_cast<std::size_t>(i)], yj, in.p) - y[static_cast<std::size_t>(i)] + yv;
        if (rc >= -eps) return;
        const std::pair<double, int> cand_rc{rc, i};
        if (best.size() < keep) {
          best.push_back(cand_rc);
          std::push_heap(best.begin(), best.end());
        } else if (cand_rc < best.front()) {
          std::pop_heap(best.begin(), best.end());
          best.back() = cand_rc;
          std::push_heap(best.begin(), best.end());
        }
      });
      for (const auto& b : best) additions.emplace_back(b.second, j);
    }
    if (additions.empty()) {
      if (ns.status() != NetworkSimplex::Status::Optimal) {
        throw ArgumentError("transport problem is infeasible (unbalanced masses?)");
      }
      break;
    }
    for (auto [i, j] : additions) add_pair(i, j);
  }

  out.pivots = ns.pivot_count();
  out.total_cost = ns.total_cost();
  for (int a = 0; a < ns.arc_count(); ++a) {
    const double f = ns.flow(a);
    const auto [i, j] = arc_pair[static_cast<std::size_t>(a)];
    if (f <= 0.0 || (i == kBoundary && j == kBoundary)) continue;
    out.entries.push_back({i, j, f, ns.arc_cost(a)});
  }
  std::sort(out.entries.begin(), out.entries.end(), [](const PlanEntry& a, const PlanEntry& b) {
    return std::pair(a.source, a.target) < std::pair(b.source, b.target);
  });
  for (int a = 0; a < ns.arc_count(); ++a) {
    if (!ns.is_basic(a)) continue;
    const auto [i, j] = arc_pair[static_cast<std::size_t>(a)];
    out.basis.push_back({i, j, std::max(ns.flow(a), 0.0), ns.arc_cost(a)});
  }

  out.f.resize(static_cast<std::size_t>(n));
  out.g.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < n; ++i) out.f[static_cast<std::size_t>(i)] = ns.dual(i);
  for (int j = 0; j < m; ++j) out.g[static_cast<std::size_t>(j)] = -ns.dual(n + j);
  if (boundary) {
    // Shift so that g(B') = 0, then lift f(B) to 0 by clamping g_j at the
    // exit cost; neither step lowers the dual objective.
    const double shift = ns.dual(node_b_prime);
    for (double& f : out.f) f -= shift;
    for (double& g : out.g) g += shift;
    for (int j = 0; j < m; ++j) {
      out.g[static_cast<std::size_t>(j)] = std::min(out.g[static_cast<std::size_t>(j)], (*in.exit_y)[static_cast<std::size_t>(j)]);
    }
    for (int i = 0; i < n; ++i) {
      out.f[static_cast<std::size_t>(i)] = std::min(out.f[static_cast<std::size_t>(i)], (*in.exit_x)[static_cast<std::size_t>(i)]);
    }
  }
  return out;
}

// Targets much more numerous than sources are solved coarse to fine: the
// optimal basis for targets merged in fours seeds the fine problem.
inline BipartiteFlowOutput solve_bipartite_flow(const BipartiteFlowInput& in, const TransportOptions& opt) {
  const std::size_t n = in.xs.size();
  const std::size_t m = in.ys.size();
  const bool dense = n * m <= opt.dense_pair_limit;
  if (dense || !opt.multiscale || !in.warm_basis.empty() || m <= 2 * n || m < 256) return solve_bipartite_level(in, opt);
  const CoarseTargets coarse = coarsen_targets(in);
  BipartiteFlowInput sub{in.xs, in.mass_x, coarse.ys, coarse.mass, in.p, in.exit_x, std::nullopt, {}};
  if (in.exit_y) sub.exit_y = std::span<const double>(coarse.exit);
  const BipartiteFlowOutput coarse_out = solve_bipartite_flow(sub, opt);
  BipartiteFlowInput fine = in;
  fine.warm_basis = refine_basis(in, coarse, coarse_out.basis);
  BipartiteFlowOutput out = solve_bipartite_level(fine, opt);
  out.pivots += coarse_out.pivots;
  return out;
}

inline std::vector<double> masses_of(const AtomicMeasure& m) {
  std::vector<double> out;
  out.reserve(m.size());
  for (const Atom& a : m.atoms()) out.push_back(a.mass);
  return out;
}

}  // namespace detail

// Exact W_p^p between two atomic measures of equal total mass (1e-9
// relative). The target masses are rescaled by the ratio of totals before
// solving so that the flow problem balances exactly.
inline TransportPlan transport_cost(const AtomicMeasure& mu, const AtomicMeasure& nu, double p,
                                    const TransportOptions& opt = {}) {
  if (p < 1.0) throw ArgumentError("cost exponent p must be >= 1");
  const double tm = mu.total_mass();
  const double tn = nu.total_mass();
  if (std::abs(tm - tn) > 1e-9 * std::max(std::abs(tm), std::abs(tn))) {
    throw ArgumentError("transport_cost requires equal total masses");
  }
  TransportPlan plan;
  plan.p = p;
  plan.source_points = mu.points();
  plan.target_points = nu.points();
  if (mu.empty() && nu.empty()) return plan;
  if (mu.empty() || nu.empty()) throw ArgumentError("transport_cost requires equal total masses");

  const std::vector<double> mx = detail::masses_of(mu);
  std::vector<double> my = detail::masses_of(nu);
  for (double& v : my) v *= tm / tn;
  detail::BipartiteFlowInput in{plan.source_points, mx, plan.target_points, my, p, std::nullopt, std::nullopt, {}};
  detail::BipartiteFlowOutput out = detail::solve_bipartite_flow(in, opt);
  plan.entries = std::move(out.entries);
  plan.total_cost = out.total_cost;
  plan.dual_f = std::move(out.f);
  plan.dual_g = std::move(out.g);
  plan.pivots = out.pivots;
  plan.pricing_rounds = out.rounds;
  return plan;
}

// Exact boundary transport Wb_p^p on a polygon: mass may be created at or
// absorbed by the boundary at cost d(., boundary)^p. Reduced to a balanced
// min-cost flow with exactly two pseudo-nodes B (supply nu(Omega)) and B'
// (demand mu(Omega)) joined by a zero-cost arc.
inline TransportPlan boundary_transport_cost(const AtomicMeasure& mu, const AtomicMeasure& nu,
                                             const Polygon& poly, double p,
                                             const TransportOptions& opt = {}) {
  if (p < 1.0) throw ArgumentError("cost exponent p must be >= 1");
  TransportPlan plan;
  plan.p = p;
  plan.boundary_variant = true;
  plan.source_points = mu.points();
  plan.target_points = nu.points();
  std::vector<double> exit_x, exit_y;
  const double tol = 1e-12 * poly.scale();
  const auto exits = [&](const std::vector<Point>& pts, std::vector<double>& cost, std::vector<Point>& where) {
    for (Point q : pts) {
      const SegmentProjection proj = poly.boundary_distance(q);
      if (!poly.contains(q) || proj.distance <= tol) {
        throw ArgumentError("boundary transport requires atoms strictly inside the domain");
      }
      cost.push_back(length_pow(proj.distance, p));
      where.push_back(proj.point);
    }
  };
  exits(plan.source_points, exit_x, plan.source_exits);
  exits(plan.target_points, exit_y, plan.target_exits);
  if (mu.empty() && nu.empty()) return plan;

  const std::vector<double> mx = detail::masses_of(mu);
  const std::vector<double> my = detail::masses_of(nu);
  detail::BipartiteFlowInput in{plan.source_points, mx, plan.target_points, my, p,
                                std::span<const double>(exit_x), std::span<const double>(exit_y), {}};
  detail::BipartiteFlowOutput out = detail::solve_bipartite_flow(in, opt);
  plan.entries = std::move(out.entries);
  plan.total_cost = out.total_cost;
  plan.dual_f = std::move(out.f);
  plan.dual_g = std::move(out.g);
  plan.pivots = out.pivots;
  plan.pricing_rounds = out.rounds;
  return plan;
}

// Marginal check: row and column sums against the atom masses. For the
// boundary variant only interior atoms are constrained (boundary legs are
// free), which is the same check on the atom rows and columns.
inline double max_marginal_error(const TransportPlan& plan, const AtomicMeasure& mu, const AtomicMeasure& nu) {
  std::vector<double> rows(mu.size(), 0.0), cols(nu.size(), 0.0);
  for (const PlanEntry& e : plan.entries) {
    if (e.source != kBoundary) rows[static_cast<std::size_t>(e.source)] += e.mass;
    if (e.target != kBoundary) cols[static_cast<std::size_t>(e.target)] += e.mass;
  }
  double err = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) err = std::max(err, std::abs(rows[i] - mu[i].mass));
  for (std::size_t j = 0; j < nu.size(); ++j) err = std::max(err, std::abs(cols[j] - nu[j].mass));
  return err;
}

// Largest violation of the dual constraints over all pairs (and the
// boundary constraints for Wb); <= 0 means feasible.
inline double max_dual_violation(const TransportPlan& plan) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < plan.source_points.size(); ++i) {
    for (std::size_t j = 0; j < plan.target_points.size(); ++j) {
      const double c = cost_pow(plan.source_points[i], plan.target_points[j], plan.p);
      worst = std::max(worst, plan.dual_f[i] + plan.dual_g[j] - c);
    }
  }
  if (plan.boundary_variant) {
    for (std::size_t i = 0; i < plan.source_points.size(); ++i) {
      worst = std::max(worst, plan.dual_f[i] - length_pow(distance(plan.source_points[i], plan.source_exits[i]), plan.p));
    }
    for (std::size_t j = 0; j < plan.target_points.size(); ++j) {
      worst = std::max(worst, plan.dual_g[j] - length_pow(distance(plan.target_points[j], plan.target_exits[j]), plan.p));
    }
  }
  return worst;
}

inline double plan_cost(const TransportPlan& plan) {
  double s = 0.0;
  for (const PlanEntry& e : plan.entries) s += e.mass * e.leg_cost;
  return s;
}

struct GridMeasure {
  AtomicMeasure measure;
  double hx = 0.0;
  double hy = 0.0;
  int nx = 0;
  int ny = 0;
};

// Uniform grid of about target_cells cells over the bounding box; one atom
// per cell whose center lies strictly inside the domain, with mass
// rho(center) * cell area, renormalized to total_mass.
inline GridMeasure grid_measure(const DensitySpec& spec, double target_cells, double total_mass = 1.0) {
  const Polygon& poly = spec.domain();
  const Box box = poly.bounding_box();
  const double h = std::sqrt(poly.area() / target_cells);
  GridMeasure g;
  g.nx = std::max(1, static_cast<int>(std::lround(box.width() / h)));
  g.ny = std::max(1, static_cast<int>(std::lround(box.height() / h)));
  g.hx = box.width() / g.nx;
  g.hy = box.height() / g.ny;
  std::vector<Atom> atoms;
  double total = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const Point c{box.lo.x + (i + 0.5) * g.hx, box.lo.y + (j + 0.5) * g.hy};
      if (!poly.contains_strictly(c)) continue;
      const double w = spec(c) * g.hx * g.hy;
      atoms.push_back({c, w});
      total += w;
    }
  }
  if (atoms.empty()) throw ArgumentError("grid too coarse: no cell center inside the domain");
  for (Atom& a : atoms) a.mass *= total_mass / total;
  g.measure = AtomicMeasure(std::move(atoms));
  return g;
}

struct SemidiscreteResult {
  TransportPlan plan;
  double cost = 0.0;
  double h = 0.0;           // grid spacing (larger of the two axes)
  double bias_bound = 0.0;  // bound on |W_2(mu_n, grid) - W_2(mu_n, rho)| from in-cell transport
  std::size_t grid_atoms = 0;
};

// W_p^p(mu_n, rho) with mu_n the uniform empirical measure of X and rho
// replaced by its grid discretization at about K n cells. With boundary set,
// the boundary variant Wb is solved instead.
inline SemidiscreteResult semidiscrete_cost(std::span<const Point> xs, const DensitySpec& spec, double grid_factor,
                                            double p, bool boundary = false, const TransportOptions& opt = {}) {
  if (!(grid_factor >= 4.0)) throw ArgumentError("grid factor K must be >= 4");
  if (xs.empty()) throw ArgumentError("semidiscrete cost needs at least one point");
  const GridMeasure g = grid_measure(spec, grid_factor * static_cast<double>(xs.size()));
  const AtomicMeasure mu = AtomicMeasure::uniform(xs);
  SemidiscreteResult out;
  out.plan = boundary ? boundary_transport_cost(mu, g.measure, spec.domain(), p, opt)
                      : transport_cost(mu, g.measure, p, opt);
  out.cost = out.plan.total_cost;
  out.h = std::max(g.hx, g.hy);
  out.bias_bound = std::hypot(g.hx, g.hy);
  out.grid_atoms = g.measure.size();
  return out;
}

// One leg of a restricted coupling; endpoints flagged as boundary lie on the
// boundary of the cell.
struct RestrictedLeg {
  Point from;
  Point to;
  double mass = 0.0;
  bool from_boundary = false;
  bool to_boundary = false;
};

struct RestrictedPlan {
  std::vector<RestrictedLeg> legs;
  double cost = 0.0;
};

// Splits a coupling over disjoint open cells. A pair inside one cell is kept;
// a pair joining two cells becomes a leg from x to where the segment leaves
// the cell of x and a leg from where the reversed segment leaves the cell of
// y to y; endpoints outside every cell (including boundary exits of a Wb
// plan) contribute only the leg of the other endpoint. Each result is a Wb
// coupling of its cell, and the summed cost never exceeds the plan cost for
// p >= 1.
inline std::vector<RestrictedPlan> restrict_plan(const TransportPlan& plan, std::span<const Region> cells,
                                                 const Polygon& poly) {
  for (const auto* pts : {&plan.source_points, &plan.target_points}) {
    for (Point q : *pts) {
      if (!poly.contains(q)) throw ArgumentError("plan atom outside the domain");
    }
  }
  const auto cell_of = [&](Point q) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (cells[k].contains(q)) return static_cast<int>(k);
    }
    return -1;
  };
  std::vector<RestrictedPlan> out(cells.size());
  const auto add = [&](int k, Point from, Point to, double mass, bool fb, bool tb) {
    RestrictedPlan& r = out[static_cast<std::size_t>(k)];
    r.legs.push_back({from, to, mass, fb, tb});
    r.cost += mass * cost_pow(from, to, plan.p);
  };
  for (const PlanEntry& e : plan.entries) {
    if (e.source == kBoundary && e.target == kBoundary) continue;
    const Point x = e.source == kBoundary ? plan.target_exits[static_cast<std::size_t>(e.target)]
                                          : plan.source_points[static_cast<std::size_t>(e.source)];
    const Point y = e.target == kBoundary ? plan.source_exits[static_cast<std::size_t>(e.source)]
                                          : plan.target_points[static_cast<std::size_t>(e.target)];
    const int k = e.source == kBoundary ? -1 : cell_of(x);
    const int j = e.target == kBoundary ? -1 : cell_of(y);
    if (k >= 0 && k == j) {
      add(k, x, y, e.mass, false, false);
      continue;
    }
    if (k >= 0) {
      const double t = cells[static_cast<std::size_t>(k)].exit_parameter(x, y);
      add(k, x, x + t * (y - x), e.mass, false, true);
    }
    if (j >= 0) {
      const double t = cells[static_cast<std::size_t>(j)].exit_parameter(y, x);
      add(j, y + t * (x - y), y, e.mass, true, false);
    }
  }
  return out;
}

// The four open rectangles cut from a box by the lines x = c.x and y = c.y.
inline std::vector<Region> quadrant_partition(const Box& box, Point c) {
  std::vector<Region> out;
  const double xs[3] = {box.lo.x, c.x, box.hi.x};
  const double ys[3] = {box.lo.y, c.y, box.hi.y};
  for (int b = 0; b < 2; ++b) {
    for (int a = 0; a < 2; ++a) {
      out.push_back(Region{{Polygon::rectangle(xs[a], ys[b], xs[a + 1], ys[b + 1])}});
    }
  }
  return out;
}

// Injective matching X -> Y (|X| <= |Y|) by network simplex, for sizes where
// the dense assignment solver is too slow. Unit masses; when |Y| > |X| the
// unmatched targets are fed by the source pseudo-node at zero cost, and the
// exit arc of every source costs more than any matching arc, so it is never
// used.
inline MatchingResult flow_matching(std::span<const Point> xs, std::span<const Point> ys, double p,
                                    const TransportOptions& opt = {}) {
  if (p < 1.0) throw ArgumentError("cost exponent p must be >= 1");
  if (xs.size() > ys.size()) throw ArgumentError("matching requires |X| <= |Y|");
  MatchingResult out;
  if (xs.empty()) return out;
  const std::vector<double> mx(xs.size(), 1.0);
  const std::vector<double> my(ys.size(), 1.0);
  std::vector<Point> all(xs.begin(), xs.end());
  all.insert(all.end(), ys.begin(), ys.end());
  const std::vector<double> exit_x(xs.size(), length_pow(bounding_square(all).diameter(), p) + 1.0);
  const std::vector<double> exit_y(ys.size(), 0.0);
  detail::BipartiteFlowInput in{xs, mx, ys, my, p, std::nullopt, std::nullopt, {}};
  if (ys.size() > xs.size()) {
    in.exit_x = std::span<const double>(exit_x);
    in.exit_y = std::span<const double>(exit_y);
  }
  const detail::BipartiteFlowOutput flow = detail::solve_bipartite_flow(in, opt);
  out.assignment.assign(xs.size(), -1);
  for (const PlanEntry& e : flow.entries) {
    if (e.source == kBoundary || e.target == kBoundary || e.mass < 0.5) continue;
    out.assignment[static_cast<std::size_t>(e.source)] = e.target;
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const int j = out.assignment[i];
    if (j < 0) throw SolverRefusal("flow matching returned a fractional solution");
    out.cost += cost_pow(xs[i], ys[static_cast<std::size_t>(j)], p);
  }
  return out;
}

}  // namespace matchlab
