#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "matchlab/error.hpp"
#include "matchlab/geometry.hpp"

namespace matchlab {

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

// Pearson goodness of fit of points binned on a cells x cells grid over the
// box. expected(i, j) is the probability of cell (i, j); by default uniform.
inline ChiSquareResult chi_square_test(std::span<const Point> points, const Box& box, int cells,
                                       const std::function<double(int, int)>& expected = {}) {
  if (cells < 1 || points.empty()) throw ArgumentError("chi-square needs cells >= 1 and points");
  std::vector<double> counts(static_cast<std::size_t>(cells * cells), 0.0);
  for (Point p : points) {
    const int i = std::clamp(static_cast<int>((p.x - box.lo.x) / box.width() * cells), 0, cells - 1);
    const int j = std::clamp(static_cast<int>((p.y - box.lo.y) / box.height() * cells), 0, cells - 1);
    counts[static_cast<std::size_t>(j * cells + i)] += 1.0;
  }
  const double n = static_cast<double>(points.size());
  ChiSquareResult r;
  for (int j = 0; j < cells; ++j) {
    for (int i = 0; i < cells; ++i) {
      const double prob = expected ? expected(i, j) : 1.0 / (cells * cells);
      const double e = n * prob;
      const double d = counts[static_cast<std::size_t>(j * cells + i)] - e;
      r.statistic += d * d / e;
    }
  }
  r.dof = cells * cells - 1;
  r.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(r.dof), r.statistic));
  return r;
}

}  // namespace matchlab
