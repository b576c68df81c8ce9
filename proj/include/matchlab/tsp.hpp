#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "matchlab/assignment.hpp"
#include "matchlab/error.hpp"
#include "matchlab/geometry.hpp"
#include "matchlab/hilbert.hpp"
#include "matchlab/transport.hpp"

namespace matchlab {

enum class TourMethod { kExactDp, kEnumeration, kHeuristic };

inline std::string to_string(TourMethod m) {
  switch (m) {
    case TourMethod::kExactDp: return "exact-dp";
    case TourMethod::kEnumeration: return "enumeration";
    case TourMethod::kHeuristic: return "heuristic";
  }
  return "heuristic";
}

// Alternating cycle x_sigma(1), y_tau(1), x_sigma(2), ..., y_tau(n), back to
// x_sigma(1).
struct TourSolution {
  std::vector<int> sigma;
  std::vector<int> tau;
  double cost = 0.0;
  TourMethod method = TourMethod::kHeuristic;
  double matching = 0.0;    // heuristic only: optimal matching cost
  double curve_tour = 0.0;  // heuristic only: squared Hilbert tour length of X
};

// Edge costs are summed in ascending order, so every traversal of the same
// cycle gives the same floating-point value.
inline double tour_cost(std::span<const Point> xs, std::span<const Point> ys, std::span<const int> sigma,
                        std::span<const int> tau) {
  const std::size_t n = sigma.size();
  std::vector<double> edges;
  edges.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point x = xs[static_cast<std::size_t>(sigma[i])];
    const Point y = ys[static_cast<std::size_t>(tau[i])];
    const Point next = xs[static_cast<std::size_t>(sigma[(i + 1) % n])];
    edges.push_back(squared_norm(x - y));
    edges.push_back(squared_norm(y - next));
  }
  std::sort(edges.begin(), edges.end());
  return std::accumulate(edges.begin(), edges.end(), 0.0);
}

inline constexpr int kExactTspLimit = 10;

// Exact optimum by dynamic programming over (used X, used Y, endpoint),
// anchored at x_1. Among tours of equal cost (1e-12 relative) the one whose
// alternating index sequence is lexicographically smallest is returned.
inline TourSolution bipartite_tsp_exact(std::span<const Point> xs, std::span<const Point> ys) {
  const int n = static_cast<int>(xs.size());
  if (ys.size() != xs.size()) throw ArgumentError("bipartite tour needs |X| = |Y|");
  if (n > kExactTspLimit) {
    throw SolverRefusal("exact bipartite TSP is limited to n <= " + std::to_string(kExactTspLimit) + " (got " +
                        std::to_string(n) + ")");
  }
  TourSolution out;
  out.method = TourMethod::kExactDp;
  if (n == 0) return out;
  const auto d = [&](int i, int j) {
    return squared_norm(xs[static_cast<std::size_t>(i)] - ys[static_cast<std::size_t>(j)]);
  };
  // Suffix form: best_y[xmask][ymask][j] is the cheapest completion from y_j
  // back to x_1 visiting the X outside xmask and the Y outside ymask;
  // best_x likewise from x_i. x_1 is always in xmask.
  const std::size_t xs_states = std::size_t{1} << n;
  const std::size_t ys_states = std::size_t{1} << n;
  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t size = (xs_states / 2) * ys_states * static_cast<std::size_t>(n);
  std::vector<double> best_y(size, inf);
  std::vector<double> best_x(size, inf);
  const auto idx = [&](std::size_t xm, std::size_t ym, int e) {
    return ((xm >> 1) * ys_states + ym) * static_cast<std::size_t>(n) + static_cast<std::size_t>(e);
  };
  const std::size_t full_x = xs_states - 1;
  const std::size_t full_y = ys_states - 1;
  // Process states by decreasing number of visited points.
  for (int visited = 2 * n; visited >= 1; --visited) {
    for (std::size_t xm = 1; xm <= full_x; xm += 2) {
      const int cx = std::popcount(xm);
      const int cy = visited - cx;
      if (cy < 0 || cy > n) continue;
      for (std::size_t ym = 0; ym <= full_y; ++ym) {
        if (std::popcount(ym) != cy) continue;
        if (cx == cy) {
          // Endpoint is some y in ym; next goes to an unused x, or home.
          for (int j = 0; j < n; ++j) {
            if (!(ym >> j & 1)) continue;
            double b = inf;
            if (xm == full_x) {
              b = ym == full_y ? d(0, j) : inf;
            } else {
              for (int i = 1; i < n; ++i) {
                if (xm >> i & 1) continue;
                b = std::min(b, d(i, j) + best_x[idx(xm | (std::size_t{1} << i), ym, i)]);
              }
            }
            best_y[idx(xm, ym, j)] = b;
          }
        } else if (cx == cy + 1) {
          // Endpoint is some x in xm; next goes to an unused y.
          for (int i = 0; i < n; ++i) {
            if (!(xm >> i & 1)) continue;
            if (i == 0 && cx != 1) continue;
            double b = inf;
            for (int j = 0; j < n; ++j) {
              if (ym >> j & 1) continue;
              b = std::min(b, d(i, j) + best_y[idx(xm, ym | (std::size_t{1} << j), j)]);
            }
            best_x[idx(xm, ym, i)] = b;
          }
        }
      }
    }
  }
  out.cost = best_x[idx(1, 0, 0)];
  // Walk forward taking the lowest index whose completion is optimal.
  const double tol = 1e-12 * std::max(1.0, out.cost);
  std::size_t xm = 1, ym = 0;
  int cur = 0;
  out.sigma.push_back(0);
  for (int step = 0; step < n; ++step) {
    const double here = best_x[idx(xm, ym, cur)];
    int next_y = -1;
    for (int j = 0; j < n && next_y < 0; ++j) {
      if (ym >> j & 1) continue;
      if (d(cur, j) + best_y[idx(xm, ym | (std::size_t{1} << j), j)] <= here + tol) next_y = j;
    }
    ym |= std::size_t{1} << next_y;
    out.tau.push_back(next_y);
    if (xm == full_x) break;
    const double there = best_y[idx(xm, ym, next_y)];
    int next_x = -1;
    for (int i = 1; i < n && next_x < 0; ++i) {
      if (xm >> i & 1) continue;
      if (d(i, next_y) + best_x[idx(xm | (std::size_t{1} << i), ym, i)] <= there + tol) next_x = i;
    }
    xm |= std::size_t{1} << next_x;
    out.sigma.push_back(next_x);
    cur = next_x;
  }
  out.cost = tour_cost(xs, ys, out.sigma, out.tau);
  return out;
}

// Exhaustive search over all (sigma, tau) pairs with sigma(1) = 1; test
// oracle for n <= 5.
inline TourSolution bipartite_tsp_enumerate(std::span<const Point> xs, std::span<const Point> ys) {
  const int n = static_cast<int>(xs.size());
  if (ys.size() != xs.size()) throw ArgumentError("bipartite tour needs |X| = |Y|");
  if (n > 6) throw SolverRefusal("enumeration oracle is limited to n <= 6");
  TourSolution best;
  best.method = TourMethod::kEnumeration;
  if (n == 0) return best;
  best.cost = std::numeric_limits<double>::infinity();
  std::vector<int> sigma(static_cast<std::size_t>(n)), tau(static_cast<std::size_t>(n));
  std::iota(sigma.begin(), sigma.end(), 0);
  do {
    std::iota(tau.begin(), tau.end(), 0);
    do {
      const double c = tour_cost(xs, ys, sigma, tau);
      if (c < best.cost) {
        best.cost = c;
        best.sigma = sigma;
        best.tau = tau;
      }
    } while (std::next_permutation(tau.begin(), tau.end()));
  } while (std::next_permutation(sigma.begin() + 1, sigma.end()));
  return best;
}

// Squared length of the closed tour visiting X in Hilbert order.
inline double curve_tour_cost(std::span<const Point> xs, std::span<const int> order) {
  double s = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    s += squared_norm(xs[static_cast<std::size_t>(order[i])] - xs[static_cast<std::size_t>(order[(i + 1) % order.size()])]);
  }
  return s;
}

// Upper-bound construction: tau visits X along the Hilbert curve of its
// bounding square, each x is followed by its partner under an optimal
// matching sigma.
inline TourSolution bipartite_tsp_heuristic(std::span<const Point> xs, std::span<const Point> ys,
                                            const TransportOptions& opt = {}) {
  if (ys.size() != xs.size()) throw ArgumentError("bipartite tour needs |X| = |Y|");
  if (xs.empty()) throw ArgumentError("heuristic tour needs n >= 1");
  TourSolution out;
  out.method = TourMethod::kHeuristic;
  const std::vector<int> order = hilbert_sort(xs);
  const MatchingResult m = flow_matching(xs, ys, 2.0, opt);
  out.matching = m.cost;
  out.curve_tour = curve_tour_cost(xs, order);
  for (int i : order) {
    out.sigma.push_back(i);
    out.tau.push_back(m.assignment[static_cast<std::size_t>(i)]);
  }
  out.cost = tour_cost(xs, ys, out.sigma, out.tau);
  return out;
}

}  // namespace matchlab
