#include <gtest/gtest.h>

#include <random>

#include "matchlab/domain.hpp"
#include "matchlab/seed.hpp"

using namespace matchlab;

namespace {

Polygon l_shape() { return Polygon({{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}}); }

void check_whitney(const Polygon& poly, double min_side) {
  const auto cubes = whitney_decompose(poly, min_side);
  ASSERT_FALSE(cubes.empty());
  for (const DyadicCube& q : cubes) {
    if (q.residual) {
      EXPECT_LT(q.side, 2 * min_side);
      continue;
    }
    const double d = cube_clearance(poly, q);
    EXPECT_LE(q.diameter(), d);
    EXPECT_LE(d, 4 * q.diameter());
  }
}

}  // namespace

TEST(Whitney, SandwichUnitSquare) { check_whitney(Polygon::unit_square(), 1.0 / 64); }

TEST(Whitney, SandwichLShape) { check_whitney(l_shape(), 1.0 / 64); }

TEST(Whitney, CentreCubeIsLarge) {
  for (const DyadicCube& q : whitney_decompose(Polygon::unit_square(), 1.0 / 64)) {
    if (!q.residual && q.box().contains_closed({0.5, 0.5})) {
      EXPECT_GE(q.side, 1.0 / 8);
    }
  }
}

TEST(Whitney, Deterministic) {
  const auto a = whitney_decompose(l_shape(), 1.0 / 32);
  const auto b = whitney_decompose(l_shape(), 1.0 / 32);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].origin, b[i].origin);
    EXPECT_EQ(a[i].side, b[i].side);
  }
}

TEST(Whitney, RejectsBadMinSide) {
  EXPECT_THROW(whitney_decompose(Polygon::unit_square(), 0.0), ArgumentError);
  EXPECT_THROW(whitney_decompose(Polygon::unit_square(), 5.0), ArgumentError);
}

TEST(Net, SeparationAndCovering) {
  for (const Polygon& poly : {Polygon::unit_square(), l_shape()}) {
    const double delta = 1.0 / 16;
    const auto net = boundary_net(poly, delta);
    for (std::size_t i = 0; i < net.size(); ++i) {
      for (std::size_t j = i + 1; j < net.size(); ++j) EXPECT_GE(distance(net[i], net[j]), delta / 2);
    }
    const double perimeter = poly.perimeter();
    for (int s = 0; s < 4000; ++s) {
      const Point b = poly.point_at_arclength(perimeter * s / 4000.0);
      double best = 1e300;
      for (Point x : net) best = std::min(best, distance(b, x));
      EXPECT_LT(best, delta);
    }
  }
}

class Merged : public ::testing::TestWithParam<int> {};

TEST_P(Merged, PartitionAndBounds) {
  const Polygon poly = GetParam() == 0 ? Polygon::unit_square() : l_shape();
  const double delta = 1.0 / 16;
  const Decomposition dec = merged_decomposition(poly, delta, 0.25);
  EXPECT_NEAR(dec.total_area(), poly.area(), 1e-9 * poly.area());
  int merged = 0;
  for (const WhitneyCell& c : dec.cells) {
    if (c.kind == CellKind::kMergedBoundaryRegion) {
      ++merged;
      EXPECT_FALSE(c.member_cubes.empty());
      ASSERT_TRUE(c.net_anchor.has_value());
      EXPECT_LE(c.region.diameter(), 8 * delta);
      EXPECT_GE(c.area, dec.min_area * delta * delta * (1 - 1e-12));
      EXPECT_LE(c.area, dec.max_area * delta * delta * (1 + 1e-12));
    } else {
      EXPECT_TRUE(c.member_cubes.empty());
      EXPECT_FALSE(c.net_anchor.has_value());
      EXPECT_NEAR(c.area, c.side * c.side, 1e-15);
      // Interior cells are cubes of V_delta split r^-2 ways, or cubes kept
      // whole because they sit farther than sqrt(2) delta from the boundary.
      EXPECT_TRUE(poly.contains(c.region.bounding_box().center()));
    }
  }
  EXPECT_EQ(static_cast<std::size_t>(merged), dec.net.size());
  EXPECT_GT(dec.min_area, 0.0);
  EXPECT_LE(dec.max_diameter, 8.0);

  // Random points of the domain lie in exactly one cell.
  std::mt19937_64 rng(21);
  const Box box = poly.bounding_box();
  int checked = 0;
  while (checked < 3000) {
    const Point p{box.lo.x + box.width() * uniform01(rng), box.lo.y + box.height() * uniform01(rng)};
    if (!poly.contains_strictly(p)) continue;
    ++checked;
    int hits = 0;
    for (const WhitneyCell& c : dec.cells) hits += c.region.contains(p) ? 1 : 0;
    EXPECT_EQ(hits, 1) << p.x << "," << p.y;
  }
}

INSTANTIATE_TEST_SUITE_P(Domains, Merged, ::testing::Values(0, 1));

TEST(MergedDecomposition, UnitSquareConstants) {
  const Decomposition dec = merged_decomposition(Polygon::unit_square(), 1.0 / 16, 0.25);
  // Run report constants for this configuration.
  EXPECT_NEAR(dec.min_area, 0.25, 1e-9);
  EXPECT_NEAR(dec.max_area, 1.5, 1e-9);
  EXPECT_LE(dec.max_diameter, 1.81);
}

TEST(MergedDecomposition, RefusesCoarseDelta) {
  EXPECT_THROW(merged_decomposition(l_shape(), 0.5, 0.25), SolverRefusal);
  EXPECT_THROW(merged_decomposition(Polygon::unit_square(), 1.0 / 16, 0.3), ArgumentError);
  EXPECT_THROW(merged_decomposition(Polygon::unit_square(), 0.0, 0.25), ArgumentError);
}

TEST(Clip, ConvexRingAgainstLShape) {
  // The notch square [1,2]^2 is outside; the straddling box keeps 3/4.
  const Polygon l = l_shape();
  EXPECT_TRUE(clip_to_polygon(DyadicCube{{1.0, 1.0}, 1.0, false}.ring(), l).empty());
  double area = 0.0;
  for (const Polygon& p : clip_to_polygon(DyadicCube{{0.5, 0.5}, 1.0, false}.ring(), l)) area += p.area();
  EXPECT_NEAR(area, 0.75, 1e-12);
}
