#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "matchlab/geometry.hpp"

namespace matchlab {

inline constexpr int kHilbertOrder = 16;

// Position of cell (x, y) along the Hilbert curve on a 2^order grid.
inline std::uint64_t hilbert_index(std::uint32_t x, std::uint32_t y, int order = kHilbertOrder) {
  const std::uint32_t last = static_cast<std::uint32_t>((std::uint64_t{1} << order) - 1);
  std::uint64_t d = 0;
  for (std::uint32_t s = std::uint32_t{1} << (order - 1); s > 0; s >>= 1) {
    const std::uint32_t rx = (x & s) ? 1 : 0;
    const std::uint32_t ry = (y & s) ? 1 : 0;
    d += static_cast<std::uint64_t>(s) * s * ((3 * rx) ^ ry);
    if (ry == 0) {
      if (rx == 1) {
        x = last - x;
        y = last - y;
      }
      std::swap(x, y);
    }
  }
  return d;
}

// Smallest axis-aligned square anchored at the bounding-box corner that
// contains every point.
inline Box bounding_square(std::span<const Point> points) {
  if (points.empty()) return {{0.0, 0.0}, {1.0, 1.0}};
  Box b{points.front(), points.front()};
  for (Point p : points) {
    b.lo.x = std::min(b.lo.x, p.x);
    b.lo.y = std::min(b.lo.y, p.y);
    b.hi.x = std::max(b.hi.x, p.x);
    b.hi.y = std::max(b.hi.y, p.y);
  }
  const double side = std::max({b.width(), b.height(), 1e-300});
  return {b.lo, {b.lo.x + side, b.lo.y + side}};
}

inline std::uint64_t hilbert_key(Point p, const Box& square, int order = kHilbertOrder) {
  const double cells = static_cast<double>(std::uint64_t{1} << order);
  const auto quantize = [&](double v, double lo) {
    const double t = (v - lo) / square.width() * cells;
    return static_cast<std::uint32_t>(std::clamp(t, 0.0, cells - 1.0));
  };
  return hilbert_index(quantize(p.x, square.lo.x), quantize(p.y, square.lo.y), order);
}

// Permutation sorting points by Hilbert key in the given square; ties keep
// index order.
inline std::vector<int> hilbert_sort(std::span<const Point> points, const Box& square) {
  std::vector<std::uint64_t> keys(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) keys[i] = hilbert_key(points[i], square);
  std::vector<int> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return keys[static_cast<std::size_t>(a)] < keys[static_cast<std::size_t>(b)]; });
  return order;
}

inline std::vector<int> hilbert_sort(std::span<const Point> points) {
  return hilbert_sort(points, bounding_square(points));
}

}  // namespace matchlab
