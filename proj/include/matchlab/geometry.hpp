#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "matchlab/error.hpp"

namespace matchlab {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Point a, Point b) = default;
};

inline constexpr double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline constexpr double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline constexpr double squared_norm(Point a) { return dot(a, a); }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
inline double distance(Point a, Point b) { return norm(a - b); }

// |a-b|^p. The p == 2 branch avoids pow/hypot so that squared distances are
// bit-identical wherever they are computed.
inline double cost_pow(Point a, Point b, double p) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double sq = dx * dx + dy * dy;
  if (p == 2.0) return sq;
  if (p == 1.0) return std::sqrt(sq);
  return std::pow(std::sqrt(sq), p);
}

inline double length_pow(double d, double p) {
  if (p == 2.0) return d * d;
  if (p == 1.0) return d;
  return std::pow(d, p);
}

// Axis-aligned rectangle [lo.x, hi.x] x [lo.y, hi.y].
struct Box {
  Point lo;
  Point hi;

  double width() const { return hi.x - lo.x; }
  double height() const { return hi.y - lo.y; }
  double area() const { return width() * height(); }
  double diameter() const { return std::hypot(width(), height()); }
  Point center() const { return 0.5 * (lo + hi); }
  bool contains_open(Point p) const {
    return p.x > lo.x && p.x < hi.x && p.y > lo.y && p.y < hi.y;
  }
  bool contains_closed(Point p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
  }
};

struct SegmentProjection {
  double distance;
  Point point;
};

inline SegmentProjection project_to_segment(Point p, Point a, Point b) {
  const Point ab = b - a;
  const double len2 = squared_norm(ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Point q = a + t * ab;
  return {distance(p, q), q};
}

inline int orientation_sign(Point a, Point b, Point c) {
  const double v = cross(b - a, c - a);
  return (v > 0.0) - (v < 0.0);
}

inline bool on_segment_collinear(Point a, Point b, Point p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

// Closed segments [a,b] and [c,d] share at least one point.
inline bool segments_intersect(Point a, Point b, Point c, Point d) {
  const int o1 = orientation_sign(a, b, c);
  const int o2 = orientation_sign(a, b, d);
  const int o3 = orientation_sign(c, d, a);
  const int o4 = orientation_sign(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment_collinear(a, b, c)) return true;
  if (o2 == 0 && on_segment_collinear(a, b, d)) return true;
  if (o3 == 0 && on_segment_collinear(c, d, a)) return true;
  if (o4 == 0 && on_segment_collinear(c, d, b)) return true;
  return false;
}

inline double segment_segment_distance(Point a, Point b, Point c, Point d) {
  if (segments_intersect(a, b, c, d)) return 0.0;
  return std::min({project_to_segment(a, c, d).distance, project_to_segment(b, c, d).distance,
                   project_to_segment(c, a, b).distance, project_to_segment(d, a, b).distance});
}

// Distance between segment [a,b] and the closed box.
inline double segment_box_distance(Point a, Point b, const Box& box) {
  if (box.contains_closed(a) || box.contains_closed(b)) return 0.0;
  const Point c[4] = {box.lo, {box.hi.x, box.lo.y}, box.hi, {box.lo.x, box.hi.y}};
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 4; ++k) {
    best = std::min(best, segment_segment_distance(a, b, c[k], c[(k + 1) % 4]));
    if (best == 0.0) return 0.0;
  }
  return best;
}

// Simple polygon with counter-clockwise vertices. Construction validates the
// invariants (>= 3 vertices, no crossing edges, positive signed area) and
// throws ArgumentError otherwise.
class Polygon {
 public:
  Polygon() = default;

  explicit Polygon(std::vector<Point> vertices) : vertices_(std::move(vertices)) { validate(); }

  static Polygon rectangle(double x0, double y0, double x1, double y1) {
    return Polygon({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
  }
  static Polygon unit_square() { return rectangle(0.0, 0.0, 1.0, 1.0); }

  const std::vector<Point>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  Point vertex(std::size_t i) const { return vertices_[i % vertices_.size()]; }
  Point edge_start(std::size_t e) const { return vertices_[e]; }
  Point edge_end(std::size_t e) const { return vertices_[(e + 1) % vertices_.size()]; }

  double signed_area() const {
    double s = 0.0;
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
      s += cross(edge_start(i), edge_end(i));
    }
    return 0.5 * s;
  }

  double area() const { return signed_area(); }

  Box bounding_box() const {
    Box b{vertices_.front(), vertices_.front()};
    for (Point p : vertices_) {
      b.lo.x = std::min(b.lo.x, p.x);
      b.lo.y = std::min(b.lo.y, p.y);
      b.hi.x = std::max(b.hi.x, p.x);
      b.hi.y = std::max(b.hi.y, p.y);
    }
    return b;
  }

  // Diameter of a polygon is attained at a pair of vertices.
  double diameter() const {
    double d = 0.0;
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
      for (std::size_t j = i + 1; j < vertices_.size(); ++j) {
        d = std::max(d, distance(vertices_[i], vertices_[j]));
      }
    }
    return d;
  }

  double perimeter() const {
    double s = 0.0;
    for (std::size_t i = 0; i < vertices_.size(); ++i) s += distance(edge_start(i), edge_end(i));
    return s;
  }

  // Length scale used for geometric tolerances.
  double scale() const { return bounding_box().diameter(); }

  // Ray casting; points on the boundary count as contained.
  bool contains(Point p) const {
    const double tol = 1e-12 * scale();
    bool inside = false;
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Point a = vertices_[j];
      const Point b = vertices_[i];
      if (project_to_segment(p, a, b).distance <= tol) return true;
      if ((b.y > p.y) != (a.y > p.y)) {
        const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
        if (p.x < x_cross) inside = !inside;
      }
    }
    return inside;
  }

  // Nearest boundary point; among edges at equal distance (1e-12 relative)
  // the lowest edge index wins.
  SegmentProjection boundary_distance(Point p) const {
    const double tol = 1e-12 * scale();
    SegmentProjection best{std::numeric_limits<double>::infinity(), {}};
    for (std::size_t e = 0; e < vertices_.size(); ++e) {
      const SegmentProjection cand = project_to_segment(p, edge_start(e), edge_end(e));
      if (cand.distance < best.distance - tol) best = cand;
    }
    return best;
  }

  // Strictly inside and away from the boundary.
  bool contains_strictly(Point p) const {
    return contains(p) && boundary_distance(p).distance > 1e-12 * scale();
  }

  // Point at arc length s (mod perimeter) measured from vertex 0.
  Point point_at_arclength(double s) const {
    const double per = perimeter();
    s = std::fmod(s, per);
    if (s < 0.0) s += per;
    for (std::size_t e = 0; e < vertices_.size(); ++e) {
      const double len = distance(edge_start(e), edge_end(e));
      if (s <= len || e + 1 == vertices_.size()) {
        const double t = len > 0.0 ? std::min(s / len, 1.0) : 0.0;
        return edge_start(e) + t * (edge_end(e) - edge_start(e));
      }
      s -= len;
    }
    return vertices_.front();
  }

  // Smallest of: edge length, distance between non-adjacent edges. Bounds
  // the scale below which boundary neighbourhoods look like half-planes.
  double feature_size() const {
    const std::size_t n = vertices_.size();
    double f = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      f = std::min(f, distance(edge_start(i), edge_end(i)));
      for (std::size_t j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;
        f = std::min(f, segment_segment_distance(edge_start(i), edge_end(i), edge_start(j),
                                                 edge_end(j)));
      }
    }
    return f;
  }

  // Distance from an axis-aligned box to the boundary (0 if they touch).
  double box_boundary_distance(const Box& box) const {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < vertices_.size(); ++e) {
      d = std::min(d, segment_box_distance(edge_start(e), edge_end(e), box));
      if (d == 0.0) break;
    }
    return d;
  }

 private:
  void validate() const {
    const std::size_t n = vertices_.size();
    if (n < 3) throw ArgumentError("polygon needs at least 3 vertices");
    for (Point p : vertices_) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw ArgumentError("polygon vertex is not finite");
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (edge_start(i) == edge_end(i)) throw ArgumentError("polygon has a repeated vertex");
      for (std::size_t j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;
        if (segments_intersect(edge_start(i), edge_end(i), edge_start(j), edge_end(j))) {
          throw ArgumentError("polygon edges cross (not a simple polygon)");
        }
      }
    }
    const double a = signed_area();
    const double s = bounding_box().diameter();
    if (!(a > 1e-12 * s * s)) {
      throw ArgumentError(a < 0.0 ? "polygon is clockwise; vertices must be counter-clockwise"
                                  : "degenerate polygon (area below tolerance)");
    }
  }

  std::vector<Point> vertices_;
};

inline double polygon_area(const Polygon& poly) { return poly.area(); }

// Signed area of an arbitrary vertex loop (shoelace).
inline double ring_area(std::span<const Point> ring) {
  double s = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    s += cross(ring[i], ring[(i + 1) % ring.size()]);
  }
  return 0.5 * s;
}

// Keeps the part of a convex polygon where dot(n, x) <= c.
inline std::vector<Point> clip_halfplane(std::span<const Point> poly, Point n, double c) {
  std::vector<Point> out;
  const std::size_t m = poly.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Point a = poly[i];
    const Point b = poly[(i + 1) % m];
    const double fa = dot(n, a) - c;
    const double fb = dot(n, b) - c;
    if (fa <= 0.0) out.push_back(a);
    if ((fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0)) {
      const double t = fa / (fa - fb);
      out.push_back(a + t * (b - a));
    }
  }
  return out;
}

// Smallest t in [0,1] at which a + t(b-a) leaves the open box, for a inside.
inline double box_exit_parameter(const Box& box, Point a, Point b) {
  double t = 1.0;
  const Point d = b - a;
  if (d.x > 0.0) t = std::min(t, (box.hi.x - a.x) / d.x);
  if (d.x < 0.0) t = std::min(t, (box.lo.x - a.x) / d.x);
  if (d.y > 0.0) t = std::min(t, (box.hi.y - a.y) / d.y);
  if (d.y < 0.0) t = std::min(t, (box.lo.y - a.y) / d.y);
  return std::clamp(t, 0.0, 1.0);
}

// Parameter t in [0,1] where segment a-b meets segment c-d, if they cross at
// a single point.
inline std::optional<double> segment_crossing(Point a, Point b, Point c, Point d) {
  const Point r = b - a;
  const Point s = d - c;
  const double den = cross(r, s);
  if (den == 0.0) return std::nullopt;
  const double t = cross(c - a, s) / den;
  const double u = cross(c - a, r) / den;
  if (t < 0.0 || t > 1.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return t;
}

// Union of interior-disjoint polygons, treated as an open set.
struct Region {
  std::vector<Polygon> pieces;

  double area() const {
    double s = 0.0;
    for (const Polygon& q : pieces) s += q.area();
    return s;
  }

  double diameter() const {
    double d = 0.0;
    for (std::size_t a = 0; a < pieces.size(); ++a) {
      for (std::size_t b = a; b < pieces.size(); ++b) {
        for (Point u : pieces[a].vertices()) {
          for (Point v : pieces[b].vertices()) d = std::max(d, distance(u, v));
        }
      }
    }
    return d;
  }

  Box bounding_box() const {
    Box b = pieces.front().bounding_box();
    for (const Polygon& q : pieces) {
      const Box c = q.bounding_box();
      b.lo.x = std::min(b.lo.x, c.lo.x);
      b.lo.y = std::min(b.lo.y, c.lo.y);
      b.hi.x = std::max(b.hi.x, c.hi.x);
      b.hi.y = std::max(b.hi.y, c.hi.y);
    }
    return b;
  }

  // Closed membership in some piece.
  bool contains(Point p) const {
    for (const Polygon& q : pieces) {
      if (q.contains(p)) return true;
    }
    return false;
  }

  // Smallest t in [0,1] at which a + t(b - a) leaves the region, for a in
  // the region: the crossings with piece edges split the segment into
  // intervals, and the first interval whose midpoint lies outside starts at
  // the exit.
  double exit_parameter(Point a, Point b) const {
    std::vector<double> ts{0.0, 1.0};
    for (const Polygon& q : pieces) {
      for (std::size_t e = 0; e < q.size(); ++e) {
        if (auto t = segment_crossing(a, b, q.edge_start(e), q.edge_end(e))) ts.push_back(*t);
      }
    }
    std::sort(ts.begin(), ts.end());
    for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
      if (ts[k + 1] - ts[k] <= 1e-14) continue;
      const double mid = 0.5 * (ts[k] + ts[k + 1]);
      if (!contains(a + mid * (b - a))) return ts[k];
    }
    return 1.0;
  }
};

}  // namespace matchlab
