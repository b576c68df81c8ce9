#include <gtest/gtest.h>

#include <cmath>

#include "matchlab/density.hpp"
#include "matchlab/stats.hpp"

using namespace matchlab;

namespace {

DensitySpec affine_half() {
  DensityParams p;
  p.affine = {0.5, 0.0};
  return build_density(DensityFamily::kAffine, p, Polygon::unit_square());
}

}  // namespace

TEST(Density, UniformIsOne) {
  const DensitySpec s = uniform_density(Polygon::unit_square());
  EXPECT_NEAR(s.normalization(), 1.0, 1e-12);
  EXPECT_NEAR(s({0.3, 0.8}), 1.0, 1e-12);
}

TEST(Density, AffineNormalization) {
  const DensitySpec s = affine_half();
  EXPECT_NEAR(s.normalization(), 1.25, 1e-9);
  EXPECT_NEAR(s({1.0, 0.4}), 1.2, 1e-9);
}

TEST(Density, CosineBumpIntegratesToOne) {
  DensityParams p;
  p.epsilon = 0.1;
  p.freq_x = 1;
  p.freq_y = 0;
  const DensitySpec s = build_density(DensityFamily::kCosineBump, p, Polygon::unit_square());
  EXPECT_NEAR(s.normalization(), 1.0, 1e-6);
}

TEST(Density, NormalizedOnLShape) {
  const Polygon l({{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}});
  const DensitySpec s = uniform_density(l);
  EXPECT_NEAR(s.normalization(), 3.0, 1e-6 * 3.0);
}

TEST(Density, RejectsBelowFloor) {
  DensityParams p;
  p.affine = {-0.95, 0.0};
  EXPECT_THROW(build_density(DensityFamily::kAffine, p, Polygon::unit_square()), ArgumentError);
  DensityParams g;
  g.grid = {{1.0, 1.0}, {1.0, 0.05}};
  EXPECT_NO_THROW(build_density(DensityFamily::kGrid, g, Polygon::unit_square()));  // clamped
}

TEST(Density, FamilyNamesRoundTrip) {
  for (auto f : {DensityFamily::kUniform, DensityFamily::kAffine, DensityFamily::kCosineBump, DensityFamily::kGrid}) {
    EXPECT_EQ(density_family_from_string(to_string(f)), f);
  }
  EXPECT_THROW(density_family_from_string("gaussian"), ArgumentError);
}

TEST(Sampling, Deterministic) {
  const DensitySpec s = affine_half();
  EXPECT_EQ(sample_points(s, 500, 9).points, sample_points(s, 500, 9).points);
  EXPECT_NE(sample_points(s, 500, 9).points, sample_points(s, 500, 10).points);
}

TEST(Sampling, PrefixStable) {
  const DensitySpec s = uniform_density(Polygon::unit_square());
  const auto a = sample_points(s, 100, 5).points;
  const auto b = sample_points(s, 300, 5).points;
  EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
}

TEST(Sampling, UniformMeanWithinClt) {
  const std::size_t n = 100000;
  const auto pts = sample_points(uniform_density(Polygon::unit_square()), n, 123).points;
  Point mean{0, 0};
  for (Point p : pts) mean = mean + p;
  mean = (1.0 / n) * mean;
  const double sigma = std::sqrt(1.0 / 12.0) / std::sqrt(static_cast<double>(n));
  EXPECT_LT(std::abs(mean.x - 0.5), 3 * sigma);
  EXPECT_LT(std::abs(mean.y - 0.5), 3 * sigma);
}

TEST(Sampling, AffineMeanWithinClt) {
  const std::size_t n = 100000;
  const auto pts = sample_points(affine_half(), n, 321).points;
  double mx = 0.0;
  for (Point p : pts) mx += p.x;
  mx /= n;
  // E[x] = int x (1 + x/2) / 1.25 = (1/2 + 1/6) / 1.25; Var from E[x^2] = (1/3 + 1/8) / 1.25.
  const double ex = (0.5 + 1.0 / 6.0) / 1.25;
  const double var = (1.0 / 3.0 + 0.125) / 1.25 - ex * ex;
  EXPECT_NEAR(ex, 0.5333333333, 1e-9);
  EXPECT_LT(std::abs(mx - ex), 3 * std::sqrt(var / n));
}

TEST(Sampling, InsideDomain) {
  const Polygon l({{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}});
  for (Point p : sample_points(uniform_density(l), 20000, 4).points) EXPECT_TRUE(l.contains(p));
}

TEST(Sampling, ChiSquareUniform) {
  const auto pts = sample_points(uniform_density(Polygon::unit_square()), 100000, 77).points;
  EXPECT_GT(chi_square_test(pts, {{0, 0}, {1, 1}}, 8).p_value, 1e-4);
}

TEST(Sampling, ChiSquareAffine) {
  const DensitySpec s = affine_half();
  const auto pts = sample_points(s, 100000, 78).points;
  // Cell probability: integral of (1 + x/2)/1.25 over the cell.
  const auto expected = [](int i, int) {
    const double a = i / 8.0, b = (i + 1) / 8.0;
    return ((b - a) + 0.25 * (b * b - a * a)) / 1.25 / 8.0;
  };
  EXPECT_GT(chi_square_test(pts, {{0, 0}, {1, 1}}, 8, expected).p_value, 1e-4);
  // Against the uniform law the same sample fails.
  EXPECT_LT(chi_square_test(pts, {{0, 0}, {1, 1}}, 8).p_value, 1e-4);
}
