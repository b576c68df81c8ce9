#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>
#include <boost/geometry/geometries/multi_polygon.hpp>

#include "matchlab/error.hpp"
#include "matchlab/geometry.hpp"

namespace matchlab {

namespace detail {

namespace bg = boost::geometry;
using BgPoint = bg::model::d2::point_xy<double>;
using BgPolygon = bg::model::polygon<BgPoint, false, false>;  // counter-clockwise, open
using BgMulti = bg::model::multi_polygon<BgPolygon>;

inline BgPolygon to_bg(std::span<const Point> ring) {
  BgPolygon out;
  for (Point p : ring) out.outer().emplace_back(p.x, p.y);
  return out;
}

// Drops repeated and collinear vertices so the ring is a valid Polygon.
inline std::vector<Point> clean_ring(std::vector<Point> ring, double tol) {
  bool changed = true;
  while (changed && ring.size() >= 3) {
    changed = false;
    for (std::size_t i = 0; i < ring.size() && ring.size() >= 3; ++i) {
      const Point a = ring[(i + ring.size() - 1) % ring.size()];
      const Point b = ring[i];
      const Point c = ring[(i + 1) % ring.size()];
      if (distance(a, b) <= tol || std::abs(cross(b - a, c - b)) <= tol * distance(a, c)) {
        ring.erase(ring.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
      }
    }
  }
  return ring;
}

}  // namespace detail

// Intersection of a convex ring with a polygon, as simple polygons. Pieces
// of negligible area are dropped.
inline std::vector<Polygon> clip_to_polygon(std::span<const Point> convex_ring, const Polygon& poly) {
  const double tol = 1e-12 * poly.scale();
  std::vector<Polygon> out;
  if (convex_ring.size() < 3 || ring_area(convex_ring) <= tol * tol) return out;
  detail::BgMulti result;
  detail::bg::intersection(detail::to_bg(convex_ring), detail::to_bg(poly.vertices()), result);
  for (const auto& piece : result) {
    std::vector<Point> ring;
    for (const auto& q : piece.outer()) ring.push_back({q.x(), q.y()});
    ring = detail::clean_ring(std::move(ring), tol);
    if (ring.size() < 3 || ring_area(ring) <= tol * poly.scale()) continue;
    out.emplace_back(std::move(ring));
  }
  return out;
}

// Axis-aligned dyadic cube of the quadtree.
struct DyadicCube {
  Point origin;
  double side = 0.0;
  bool residual = false;  // boundary cube left unrefined at the minimum side

  Box box() const { return {origin, {origin.x + side, origin.y + side}}; }
  double diameter() const { return side * std::numbers::sqrt2; }
  std::vector<Point> ring() const {
    return {origin, {origin.x + side, origin.y}, {origin.x + side, origin.y + side}, {origin.x, origin.y + side}};
  }
};

// Bounding dyadic square: side 2^ceil(log2 diam), anchored at the lower-left
// corner of the bounding box.
inline DyadicCube dyadic_root(const Polygon& poly) {
  const double side = std::exp2(std::ceil(std::log2(poly.diameter())));
  return {poly.bounding_box().lo, side, false};
}

// Distance from a cube inside the polygon to the complement.
inline double cube_clearance(const Polygon& poly, const DyadicCube& q) {
  return poly.box_boundary_distance(q.box());
}

// Maximal dyadic cubes Q inside the polygon with diam(Q) <= dist(Q, complement)
// <= 4 diam(Q), in depth-first order (children lower-left, lower-right,
// upper-left, upper-right). A cube that still meets the boundary when its
// children would fall below min_side is returned as residual.
inline std::vector<DyadicCube> whitney_decompose(const Polygon& poly, double min_side) {
  if (!(min_side > 0.0) || min_side > poly.diameter()) throw ArgumentError("min_side must lie in (0, diam]");
  std::vector<DyadicCube> out;
  std::vector<DyadicCube> stack{dyadic_root(poly)};
  while (!stack.empty()) {
    const DyadicCube q = stack.back();
    stack.pop_back();
    const Box b = q.box();
    const double clearance = poly.box_boundary_distance(b);
    if (clearance > 0.0) {
      if (!poly.contains(b.center())) continue;  // outside
      if (q.diameter() <= clearance) {
        out.push_back(q);
        continue;
      }
    }
    const double half = 0.5 * q.side;
    if (half < min_side) {
      if (clearance > 0.0 || !clip_to_polygon(q.ring(), poly).empty()) out.push_back({q.origin, q.side, true});
      continue;
    }
    // Pushed in reverse so the lower-left child is processed first.
    stack.push_back({{q.origin.x + half, q.origin.y + half}, half, false});
    stack.push_back({{q.origin.x, q.origin.y + half}, half, false});
    stack.push_back({{q.origin.x + half, q.origin.y}, half, false});
    stack.push_back({q.origin, half, false});
  }
  return out;
}

// Greedy farthest-point delta-net of the boundary, searched over boundary
// samples at spacing delta/64 in arc-length order from vertex 0 (ties go to
// the earlier sample). Covering radius < delta, separation >= delta/2.
inline std::vector<Point> boundary_net(const Polygon& poly, double delta) {
  if (!(delta > 0.0)) throw ArgumentError("delta must be positive");
  const double h = delta / 64.0;
  std::vector<Point> samples;
  for (std::size_t e = 0; e < poly.size(); ++e) {
    const Point a = poly.edge_start(e);
    const Point b = poly.edge_end(e);
    const int k = std::max(1, static_cast<int>(std::ceil(distance(a, b) / h)));
    for (int s = 0; s < k; ++s) samples.push_back(a + (static_cast<double>(s) / k) * (b - a));
  }
  std::vector<Point> net{samples.front()};
  std::vector<double> gap(samples.size());
  for (std::size_t s = 0; s < samples.size(); ++s) gap[s] = distance(samples[s], net.front());
  while (true) {
    const auto it = std::max_element(gap.begin(), gap.end());
    if (*it < delta - h) break;
    const Point x = samples[static_cast<std::size_t>(it - gap.begin())];
    net.push_back(x);
    for (std::size_t s = 0; s < samples.size(); ++s) gap[s] = std::min(gap[s], distance(samples[s], x));
  }
  return net;
}

enum class CellKind { kInteriorCube, kMergedBoundaryRegion };

inline std::string to_string(CellKind k) {
  return k == CellKind::kInteriorCube ? "interior-cube" : "merged-boundary-region";
}

struct WhitneyCell {
  Point origin;  // lower-left corner (bounding box for merged regions)
  double side = 0.0;
  CellKind kind = CellKind::kInteriorCube;
  std::vector<DyadicCube> member_cubes;
  std::optional<Point> net_anchor;
  Region region;
  double area = 0.0;
};

struct Decomposition {
  std::vector<WhitneyCell> cells;
  std::vector<Point> net;
  double delta = 0.0;
  double refine_ratio = 1.0;
  // Empirical constants of the merged regions: diam <= max_diameter * delta
  // and min_area * delta^2 <= area <= max_area * delta^2.
  double max_diameter = 0.0;
  double min_area = 0.0;
  double max_area = 0.0;

  std::vector<Region> regions() const {
    std::vector<Region> out;
    out.reserve(cells.size());
    for (const WhitneyCell& c : cells) out.push_back(c.region);
    return out;
  }

  double total_area() const {
    double s = 0.0;
    for (const WhitneyCell& c : cells) s += c.area;
    return s;
  }
};

// Whitney cubes of diameter >= delta (split into r^-2 subcubes), cubes at
// distance > sqrt(2) delta from the complement kept whole, and merged
// boundary regions: the Voronoi cells of a boundary delta-net restricted to
// the cubes lying within sqrt(2) delta of the complement, plus every cube
// that reaches farther attached whole to the lowest-index net point whose
// Voronoi cell meets it.
inline Decomposition merged_decomposition(const Polygon& poly, double delta, double r) {
  if (!(delta > 0.0)) throw ArgumentError("delta must be positive");
  const double levels = -std::log2(r);
  if (!(r > 0.0 && r <= 1.0) || std::abs(levels - std::round(levels)) > 1e-12) {
    throw ArgumentError("refine ratio must be a dyadic fraction 2^-j");
  }
  const double feature = poly.feature_size();
  if (delta > 0.25 * feature) {
    throw SolverRefusal("delta " + std::to_string(delta) + " too large for the polygon feature size " +
                        std::to_string(feature) + " (need delta <= feature/4)");
  }
  const double reach = std::numbers::sqrt2 * delta;
  const std::vector<DyadicCube> cubes = whitney_decompose(poly, delta / 8.0);
  Decomposition dec;
  dec.delta = delta;
  dec.refine_ratio = r;
  dec.net = boundary_net(poly, delta);
  const std::vector<Point>& net = dec.net;

  const auto square_cell = [&](Point origin, double side) {
    WhitneyCell c;
    c.origin = origin;
    c.side = side;
    c.kind = CellKind::kInteriorCube;
    c.region = Region{{Polygon::rectangle(origin.x, origin.y, origin.x + side, origin.y + side)}};
    c.area = side * side;
    return c;
  };

  // Voronoi pieces of one cube: only net points within (nearest + diam) of
  // the cube center can own part of it.
  const auto voronoi_pieces = [&](const DyadicCube& q) {
    const Point centre = q.box().center();
    double nearest = std::numeric_limits<double>::infinity();
    for (Point x : net) nearest = std::min(nearest, distance(centre, x));
    std::vector<int> owners;
    for (std::size_t k = 0; k < net.size(); ++k) {
      if (distance(centre, net[k]) <= nearest + q.diameter() + 1e-12 * poly.scale()) owners.push_back(static_cast<int>(k));
    }
    std::vector<std::pair<int, std::vector<Polygon>>> out;
    for (int k : owners) {
      std::vector<Point> ring = q.ring();
      const Point xk = net[static_cast<std::size_t>(k)];
      for (int j : owners) {
        if (j == k) continue;
        const Point xj = net[static_cast<std::size_t>(j)];
        ring = clip_halfplane(ring, xj - xk, 0.5 * (squared_norm(xj) - squared_norm(xk)));
      }
      std::vector<Polygon> pieces = clip_to_polygon(ring, poly);
      if (!pieces.empty()) out.emplace_back(k, std::move(pieces));
    }
    return out;
  };

  std::vector<WhitneyCell> merged(net.size());
  for (std::size_t k = 0; k < net.size(); ++k) {
    merged[k].kind = CellKind::kMergedBoundaryRegion;
    merged[k].net_anchor = net[k];
  }
  for (const DyadicCube& q : cubes) {
    const double clearance = q.residual ? 0.0 : cube_clearance(poly, q);
    if (!q.residual && q.diameter() >= delta) {
      const int split = static_cast<int>(std::lround(1.0 / r));
      const double s = q.side / split;
      for (int b = 0; b < split; ++b) {
        for (int a = 0; a < split; ++a) dec.cells.push_back(square_cell({q.origin.x + a * s, q.origin.y + b * s}, s));
      }
      continue;
    }
    if (clearance > reach) {
      dec.cells.push_back(square_cell(q.origin, q.side));
      continue;
    }
    auto pieces = voronoi_pieces(q);
    if (pieces.empty()) continue;
    if (clearance + q.diameter() < reach) {
      // Entirely within sqrt(2) delta of the complement.
      for (auto& [k, ps] : pieces) {
        WhitneyCell& c = merged[static_cast<std::size_t>(k)];
        c.member_cubes.push_back(q);
        for (Polygon& p : ps) c.region.pieces.push_back(std::move(p));
      }
    } else {
      WhitneyCell& c = merged[static_cast<std::size_t>(pieces.front().first)];
      c.member_cubes.push_back(q);
      for (Polygon& p : clip_to_polygon(q.ring(), poly)) c.region.pieces.push_back(std::move(p));
    }
  }

  dec.min_area = std::numeric_limits<double>::infinity();
  for (WhitneyCell& c : merged) {
    if (c.region.pieces.empty()) continue;
    const Box b = c.region.bounding_box();
    c.origin = b.lo;
    c.side = std::max(b.width(), b.height());
    c.area = c.region.area();
    dec.max_diameter = std::max(dec.max_diameter, c.region.diameter() / delta);
    dec.min_area = std::min(dec.min_area, c.area / (delta * delta));
    dec.max_area = std::max(dec.max_area, c.area / (delta * delta));
    dec.cells.push_back(std::move(c));
  }
  if (!std::isfinite(dec.min_area)) dec.min_area = 0.0;
  return dec;
}

}  // namespace matchlab
