#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "matchlab/error.hpp"
#include "matchlab/geometry.hpp"

namespace matchlab {

// Dense row-major cost matrix with rows <= cols.
class CostMatrix {
 public:
  CostMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  static CostMatrix from_points(std::span<const Point> rows, std::span<const Point> cols, double p) {
    CostMatrix c(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double* row = c.row(i);
      for (std::size_t j = 0; j < cols.size(); ++j) row[j] = cost_pow(rows[i], cols[j], p);
    }
    return c;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double max_entry() const {
    return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

struct AssignmentResult {
  double cost = 0.0;
  std::vector<int> row_to_col;  // injective map rows -> cols
  std::vector<double> row_dual;  // u: u[i] + v[j] <= c(i,j), tight on the assignment
  std::vector<double> col_dual;  // v
};

// Sum of c(i, sigma(i)) accumulated in row order; every cost reported for an
// injective map goes through here so equal maps give bit-identical costs.
inline double assignment_cost(const CostMatrix& c, std::span<const int> row_to_col) {
  double s = 0.0;
  for (std::size_t i = 0; i < row_to_col.size(); ++i) s += c(i, static_cast<std::size_t>(row_to_col[i]));
  return s;
}

namespace detail {

// One Dijkstra over columns from a free row in reduced costs; returns the
// free column that terminates the shortest augmenting path. Ties within tol
// prefer an unassigned column, then the lowest column index.
inline int shortest_augmenting_path(const CostMatrix& c, int start_row, std::span<const double> u,
                                    std::span<const double> v, std::span<int> path,
                                    std::span<const int> col_to_row, std::span<double> dist,
                                    std::vector<char>& row_seen, std::vector<char>& col_seen,
                                    std::vector<int>& remaining, double tol, double& min_val) {
  const int m = static_cast<int>(c.cols());
  std::fill(row_seen.begin(), row_seen.end(), 0);
  std::fill(col_seen.begin(), col_seen.end(), 0);
  std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
  remaining.resize(static_cast<std::size_t>(m));
  std::iota(remaining.begin(), remaining.end(), 0);
  int num_remaining = m;
  min_val = 0.0;
  int i = start_row;
  int sink = -1;
  while (sink == -1) {
    row_seen[static_cast<std::size_t>(i)] = 1;
    const double* ci = c.row(static_cast<std::size_t>(i));
    const double base = min_val - u[static_cast<std::size_t>(i)];
    int best_pos = -1;
    double lowest = std::numeric_limits<double>::infinity();
    int best_col = m;
    bool best_free = false;
    for (int it = 0; it < num_remaining; ++it) {
      const int j = remaining[static_cast<std::size_t>(it)];
      const auto uj = static_cast<std::size_t>(j);
      const double r = base + ci[uj] - v[uj];
      if (r < dist[uj]) {
        path[uj] = i;
        dist[uj] = r;
      }
      const double d = dist[uj];
      const bool is_free = col_to_row[uj] == -1;
      if (d < lowest - tol) {
        lowest = d;
        best_pos = it;
        best_col = j;
        best_free = is_free;
      } else if (d <= lowest + tol) {
        if ((is_free && !best_free) || (is_free == best_free && j < best_col)) {
          if (d < lowest) lowest = d;
          best_pos = it;
          best_col = j;
          best_free = is_free;
        }
      }
    }
    if (best_pos < 0) throw ArgumentError("assignment problem is infeasible");
    min_val = dist[static_cast<std::size_t>(best_col)];
    const int j = best_col;
    if (col_to_row[static_cast<std::size_t>(j)] == -1) {
      sink = j;
    } else {
      i = col_to_row[static_cast<std::size_t>(j)];
    }
    col_seen[static_cast<std::size_t>(j)] = 1;
    remaining[static_cast<std::size_t>(best_pos)] = remaining[static_cast<std::size_t>(--num_remaining)];
  }
  return sink;
}

}  // namespace detail

// Rectangular shortest-augmenting-path assignment (rows <= cols), the
// Jonker-Volgenant augmentation phase run row by row without padding the
// matrix to square. O(rows^2 * cols) worst case.
inline AssignmentResult solve_assignment(const CostMatrix& c) {
  const std::size_t n = c.rows();
  const std::size_t m = c.cols();
  if (n > m) throw ArgumentError("assignment requires rows <= cols");
  AssignmentResult res;
  res.row_to_col.assign(n, -1);
  res.row_dual.assign(n, 0.0);
  res.col_dual.assign(m, 0.0);
  if (n == 0) return res;

  const double tol = 1e-12 * std::max(1.0, c.max_entry());
  std::vector<int> col_to_row(m, -1);
  std::vector<int> path(m, -1);
  std::vector<double> dist(m);
  std::vector<char> row_seen(n), col_seen(m);
  std::vector<int> remaining;
  auto& u = res.row_dual;
  auto& v = res.col_dual;

  for (std::size_t cur = 0; cur < n; ++cur) {
    double min_val = 0.0;
    const int sink = detail::shortest_augmenting_path(c, static_cast<int>(cur), u, v, path, col_to_row,
                                                      dist, row_seen, col_seen, remaining, tol,
                                                      min_val);
    u[cur] += min_val;
    for (std::size_t i = 0; i < n; ++i) {
      if (row_seen[i] && i != cur) {
        u[i] += min_val - dist[static_cast<std::size_t>(res.row_to_col[i])];
      }
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (col_seen[j]) v[j] -= min_val - dist[j];
    }
    int j = sink;
    while (true) {
      const int i = path[static_cast<std::size_t>(j)];
      col_to_row[static_cast<std::size_t>(j)] = i;
      std::swap(res.row_to_col[static_cast<std::size_t>(i)], j);
      if (i == static_cast<int>(cur)) break;
    }
  }
  res.cost = assignment_cost(c, res.row_to_col);
  return res;
}

struct MatchingResult {
  double cost = 0.0;                 // sum_i |x_i - y_sigma(i)|^p
  std::vector<int> assignment;       // sigma
  std::vector<double> row_dual;
  std::vector<double> col_dual;
};

// Minimum over injective sigma: X -> Y of sum_i |x_i - y_sigma(i)|^p.
inline MatchingResult matching_cost(std::span<const Point> xs, std::span<const Point> ys, double p) {
  if (p < 1.0) throw ArgumentError("cost exponent p must be >= 1");
  if (xs.size() > ys.size()) throw ArgumentError("matching requires |X| <= |Y|");
  MatchingResult out;
  if (xs.empty()) return out;
  const CostMatrix c = CostMatrix::from_points(xs, ys, p);
  AssignmentResult a = solve_assignment(c);
  out.cost = a.cost;
  out.assignment = std::move(a.row_to_col);
  out.row_dual = std::move(a.row_dual);
  out.col_dual = std::move(a.col_dual);
  return out;
}

// Exhaustive minimum over all injective maps; test oracle for n <= m <= 8.
inline double brute_force_oracle(std::span<const Point> xs, std::span<const Point> ys, double p) {
  if (xs.size() > ys.size()) throw ArgumentError("oracle requires |X| <= |Y|");
  if (ys.size() > 8) throw SolverRefusal("brute-force oracle is limited to 8 points per side");
  const std::size_t n = xs.size();
  const std::size_t m = ys.size();
  if (n == 0) return 0.0;
  const CostMatrix c = CostMatrix::from_points(xs, ys, p);
  // Enumerate injective maps as the first n entries of permutations of
  // 0..m-1; each prefix is visited (m-n)! times, which is harmless at m <= 8.
  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    best = std::min(best, assignment_cost(c, std::span<const int>(perm.data(), n)));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace matchlab
