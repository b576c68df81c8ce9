#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "matchlab/error.hpp"
#include "matchlab/geometry.hpp"
#include "matchlab/seed.hpp"

namespace matchlab {

enum class DensityFamily { kUniform, kAffine, kCosineBump, kGrid };

inline std::string to_string(DensityFamily f) {
  switch (f) {
    case DensityFamily::kUniform: return "uniform";
    case DensityFamily::kAffine: return "affine";
    case DensityFamily::kCosineBump: return "cosine-bump";
    case DensityFamily::kGrid: return "grid";
  }
  return "uniform";
}

inline DensityFamily density_family_from_string(const std::string& s) {
  if (s == "uniform") return DensityFamily::kUniform;
  if (s == "affine") return DensityFamily::kAffine;
  if (s == "cosine-bump" || s == "cosine") return DensityFamily::kCosineBump;
  if (s == "grid") return DensityFamily::kGrid;
  throw ArgumentError("unknown density family '" + s + "'");
}

// Family parameters. All families are written in bounding-box coordinates
// (u, v) in [0,1]^2 of the domain, so "affine a=(0.5,0)" on the unit square is
// 1 + 0.5 x:
//   uniform      1
//   affine       1 + a.x u + a.y v
//   cosine-bump  1 + eps cos(kx pi u) cos(ky pi v)
//   grid         bilinear interpolation of values[iv][iu] on the (u, v)
//                lattice, clamped below at the positivity floor
struct DensityParams {
  Point affine{0.0, 0.0};
  double epsilon = 0.0;
  int freq_x = 1;
  int freq_y = 0;
  std::vector<std::vector<double>> grid;
};

inline constexpr double kPositivityFloor = 0.1;

// Normalized density on a polygon: rho = f / Z with f one of the families.
class DensitySpec {
 public:
  DensitySpec(DensityFamily family, DensityParams params, Polygon domain, double holder_exponent = 1.0)
      : family_(family), params_(std::move(params)), domain_(std::move(domain)), alpha_(holder_exponent) {
    if (!(alpha_ > 0.0 && alpha_ <= 1.0)) throw ArgumentError("Holder exponent must lie in (0,1]");
    box_ = domain_.bounding_box();
    check_positivity();
    normalization_ = integrate_unnormalized(kQuadratureCells);
    if (!(normalization_ > 0.0)) throw ArgumentError("density has non-positive integral");
    sup_ = max_unnormalized() / normalization_;
  }

  DensityFamily family() const { return family_; }
  const DensityParams& params() const { return params_; }
  const Polygon& domain() const { return domain_; }
  double holder_exponent() const { return alpha_; }
  double normalization() const { return normalization_; }
  double sup() const { return sup_; }

  // Normalized density at a point of the domain.
  double operator()(Point p) const { return unnormalized(p) / normalization_; }

  double unnormalized(Point p) const {
    const double u = (p.x - box_.lo.x) / box_.width();
    const double v = (p.y - box_.lo.y) / box_.height();
    switch (family_) {
      case DensityFamily::kUniform:
        return 1.0;
      case DensityFamily::kAffine:
        return 1.0 + params_.affine.x * u + params_.affine.y * v;
      case DensityFamily::kCosineBump:
        return 1.0 + params_.epsilon * std::cos(params_.freq_x * std::numbers::pi * u) *
                         std::cos(params_.freq_y * std::numbers::pi * v);
      case DensityFamily::kGrid:
        return std::max(kPositivityFloor, bilinear(u, v));
    }
    return 1.0;
  }

  // Midpoint quadrature of the unnormalized density on a cells x cells grid
  // over the bounding box; cells cut by the boundary use the exact area of
  // the clipped piece and the value at its centroid.
  double integrate_unnormalized(int cells) const {
    const double hx = box_.width() / cells;
    const double hy = box_.height() / cells;
    const double half_diag = 0.5 * std::hypot(hx, hy);
    double total = 0.0;
    for (int j = 0; j < cells; ++j) {
      double row = 0.0;
      for (int i = 0; i < cells; ++i) {
        const Box cell{{box_.lo.x + i * hx, box_.lo.y + j * hy},
                       {box_.lo.x + (i + 1) * hx, box_.lo.y + (j + 1) * hy}};
        const Point c = cell.center();
        const double d = domain_.boundary_distance(c).distance;
        if (d > half_diag) {
          if (domain_.contains(c)) row += unnormalized(c) * hx * hy;
          continue;
        }
        const std::vector<Point> piece = clip_to_box(cell);
        const double a = ring_area(piece);
        if (a > 0.0) row += unnormalized(centroid(piece, a)) * a;
      }
      total += row;
    }
    return total;
  }

  static constexpr int kQuadratureCells = 1024;

 private:
  double bilinear(double u, double v) const {
    const auto& g = params_.grid;
    const int ny = static_cast<int>(g.size());
    const int nx = static_cast<int>(g.front().size());
    const double fx = std::clamp(u, 0.0, 1.0) * (nx - 1);
    const double fy = std::clamp(v, 0.0, 1.0) * (ny - 1);
    const int ix = std::min(static_cast<int>(fx), nx - 2);
    const int iy = std::min(static_cast<int>(fy), ny - 2);
    const double tx = fx - ix;
    const double ty = fy - iy;
    const auto at = [&](int a, int b) { return g[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)]; };
    return (1 - tx) * (1 - ty) * at(ix, iy) + tx * (1 - ty) * at(ix + 1, iy) +
           (1 - tx) * ty * at(ix, iy + 1) + tx * ty * at(ix + 1, iy + 1);
  }

  std::vector<Point> clip_to_box(const Box& b) const {
    std::vector<Point> poly(domain_.vertices());
    poly = clip_halfplane(poly, {1.0, 0.0}, b.hi.x);
    poly = clip_halfplane(poly, {-1.0, 0.0}, -b.lo.x);
    poly = clip_halfplane(poly, {0.0, 1.0}, b.hi.y);
    poly = clip_halfplane(poly, {0.0, -1.0}, -b.lo.y);
    return poly;
  }

  static Point centroid(const std::vector<Point>& ring, double area) {
    double cx = 0.0;
    double cy = 0.0;
    for (std::size_t i = 0; i < ring.size(); ++i) {
      const Point a = ring[i];
      const Point b = ring[(i + 1) % ring.size()];
      const double w = cross(a, b);
      cx += (a.x + b.x) * w;
      cy += (a.y + b.y) * w;
    }
    return {cx / (6.0 * area), cy / (6.0 * area)};
  }

  double max_unnormalized() const {
    switch (family_) {
      case DensityFamily::kUniform:
        return 1.0;
      case DensityFamily::kAffine: {
        double m = 0.0;
        for (Point p : domain_.vertices()) m = std::max(m, unnormalized(p));
        return m;
      }
      case DensityFamily::kCosineBump:
        return 1.0 + std::abs(params_.epsilon);
      case DensityFamily::kGrid: {
        double m = kPositivityFloor;
        for (const auto& row : params_.grid) {
          for (double v : row) m = std::max(m, v);
        }
        return m;
      }
    }
    return 1.0;
  }

  void check_positivity() const {
    switch (family_) {
      case DensityFamily::kUniform:
        return;
      case DensityFamily::kAffine:
        // Linear: the minimum over the polygon is attained at a vertex.
        for (Point p : domain_.vertices()) {
          if (unnormalized(p) < kPositivityFloor) {
            throw ArgumentError("affine density drops below the positivity floor 0.1");
          }
        }
        return;
      case DensityFamily::kCosineBump:
        if (1.0 - std::abs(params_.epsilon) < kPositivityFloor) {
          throw ArgumentError("cosine-bump amplitude must satisfy 1 - |eps| >= 0.1");
        }
        if (params_.freq_x < 0 || params_.freq_y < 0) throw ArgumentError("frequencies must be >= 0");
        return;
      case DensityFamily::kGrid: {
        const auto& g = params_.grid;
        if (g.size() < 2 || g.front().size() < 2) throw ArgumentError("grid density needs >= 2x2 values");
        for (const auto& row : g) {
          if (row.size() != g.front().size()) throw ArgumentError("grid density rows differ in length");
          for (double v : row) {
            if (!std::isfinite(v)) throw ArgumentError("grid density value is not finite");
          }
        }
        return;
      }
    }
  }

  DensityFamily family_;
  DensityParams params_;
  Polygon domain_;
  double alpha_;
  Box box_{};
  double normalization_ = 1.0;
  double sup_ = 1.0;
};

inline DensitySpec build_density(DensityFamily family, DensityParams params, Polygon poly,
                                 double holder_exponent = 1.0) {
  return DensitySpec(family, std::move(params), std::move(poly), holder_exponent);
}

inline DensitySpec uniform_density(Polygon poly) {
  return DensitySpec(DensityFamily::kUniform, {}, std::move(poly));
}

struct PointSample {
  std::vector<Point> points;
  std::uint64_t seed = 0;
};

// Rejection sampling: uniform proposals on the bounding box, accepted when
// inside the domain with probability rho / sup rho.
inline PointSample sample_points(const DensitySpec& spec, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ArgumentError("sample size must be >= 1");
  PointSample out;
  out.seed = seed;
  out.points.reserve(n);
  std::mt19937_64 rng(seed);
  const Box box = spec.domain().bounding_box();
  const double envelope = spec.sup();
  const bool flat = spec.family() == DensityFamily::kUniform;
  while (out.points.size() < n) {
    const Point p{box.lo.x + uniform01(rng) * box.width(), box.lo.y + uniform01(rng) * box.height()};
    const double accept = uniform01(rng);
    if (!spec.domain().contains(p)) continue;
    if (!flat && accept * envelope > spec(p)) continue;
    out.points.push_back(p);
  }
  return out;
}

}  // namespace matchlab
