#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "matchlab/density.hpp"
#include "matchlab/seed.hpp"
#include "matchlab/spectral.hpp"
#include "matchlab/stats.hpp"

using namespace matchlab;

namespace {

constexpr double kPi = std::numbers::pi;

DensitySpec cosine_bump(double eps, int fx, int fy) {
  DensityParams p;
  p.epsilon = eps;
  p.freq_x = fx;
  p.freq_y = fy;
  return build_density(DensityFamily::kCosineBump, p, Polygon::unit_square());
}

}  // namespace

TEST(CosineField, ModeEvaluatesToCosine) {
  const CosineField f = CosineField::mode(8, 2, 1, 0.7);
  const Point p{0.3, 0.6};
  EXPECT_NEAR(f(p), 0.7 * std::cos(2 * kPi * p.x) * std::cos(kPi * p.y), 1e-14);
}

TEST(CosineField, ProjectionRecoversModes) {
  const CosineField f = CosineField::project(8, [](Point p) { return 1.0 + 0.1 * std::cos(kPi * p.x); }, 64);
  EXPECT_NEAR(f.mean(), 1.0, 1e-14);
  EXPECT_NEAR(f.at(1, 0), 0.1 / std::numbers::sqrt2, 1e-14);
  EXPECT_NEAR(f.at(2, 3), 0.0, 1e-14);
}

TEST(CosineField, ParsevalForIndicator) {
  const CosineField f = CosineField::indicator(256, Box{{0.0, 0.0}, {0.5, 1.0}});
  EXPECT_NEAR(f.l2_squared(), 0.5, 2e-3);
  EXPECT_LE(f.l2_squared(), 0.5 + 1e-12);
}

TEST(Heat, EigenfunctionDecay) {
  const CosineField f = CosineField::mode(16, 1, 0, 1.0);
  for (double t : {0.0, 0.01, 0.1, 1.0}) {
    const CosineField g = heat_evolve(f, t);
    EXPECT_NEAR(g.at(1, 0) / f.at(1, 0), std::exp(-kPi * kPi * t), 1e-12 * std::exp(-kPi * kPi * t));
  }
  EXPECT_THROW(heat_evolve(f, -1.0), ArgumentError);
}

TEST(Heat, ConstantUnchangedAndMassConserved) {
  const CosineField c = CosineField::mode(16, 0, 0, 2.5);
  EXPECT_EQ(heat_evolve(c, 3.0).coeffs(), c.coeffs());
  const CosineField f = CosineField::project(16, [](Point p) { return 1.0 + p.x * p.y; });
  EXPECT_EQ(heat_evolve(f, 0.2).mean(), f.mean());
}

TEST(Heat, SpectralGapContraction) {
  const CosineField f = CosineField::indicator(64, Box{{0.1, 0.2}, {0.4, 0.9}}).centered();
  for (double t : {0.001, 0.01, 0.1}) {
    EXPECT_LE(std::sqrt(heat_evolve(f, t).l2_squared()), std::exp(-kPi * kPi * t) * std::sqrt(f.l2_squared()) + 1e-15);
  }
}

TEST(HMinus1, ClosedForms) {
  EXPECT_NEAR(hminus1_norm(CosineField::mode(256, 1, 0, 1.0)).squared, 1.0 / (2 * kPi * kPi), 1e-10);
  EXPECT_NEAR(hminus1_norm(CosineField::mode(256, 1, 1, 1.0)).squared, 1.0 / (8 * kPi * kPi), 1e-10);
  const HMinus1Norm half = hminus1_norm(CosineField::indicator(256, Box{{0.0, 0.0}, {0.5, 1.0}}).centered());
  EXPECT_NEAR(half.squared, 1.0 / 48.0, 1e-6);
  EXPECT_GE(half.remainder, 0.0);
  EXPECT_LE(half.squared, 1.0 / 48.0);
  EXPECT_LE(1.0 / 48.0, half.squared + half.remainder + 1e-15);
}

TEST(HMinus1, RejectsNonzeroMean) {
  EXPECT_THROW(hminus1_norm(CosineField::mode(8, 0, 0, 1.0)), ArgumentError);
}

TEST(HMinus1, TimeIntegralAgrees) {
  for (auto [j, k] : {std::pair{1, 0}, std::pair{1, 1}, std::pair{2, 3}}) {
    const CosineField f = CosineField::mode(8, j, k, 1.0);
    EXPECT_NEAR(hminus1_by_time_integral(f), hminus1_norm(f).squared, 1e-6);
  }
}

TEST(SobolevRatio, HalfSquare) {
  const CosineField f = CosineField::indicator(256, Box{{0.0, 0.0}, {0.5, 1.0}}).centered();
  // |f| = 1/2 everywhere: l1 = 1/2, linf = 1/2 gives log term 0.
  EXPECT_NEAR(sobolev_bound_ratio(f, 0.5, 0.5), std::sqrt(1.0 / 48.0) / 0.5, 1e-6);
  // With linf = 1 the logarithm is log 2.
  EXPECT_NEAR(sobolev_bound_ratio(f, 0.5, 1.0), std::sqrt(1.0 / 48.0) / (0.5 * std::sqrt(std::log(2.0) + 1.0)), 1e-6);
  EXPECT_NEAR(sobolev_bound_ratio(f, 0.5, 1.0), 0.2218, 1e-4);
}

TEST(SobolevRatio, HomogeneousOfDegreeZero) {
  CosineField f = CosineField::indicator(128, Box{{0.25, 0.25}, {0.5, 0.5}}).centered();
  const double a = 1.0 / 16;
  const double r1 = sobolev_bound_ratio(f, 2 * a * (1 - a), 1 - a);
  f *= 2.0;
  EXPECT_NEAR(sobolev_bound_ratio(f, 4 * a * (1 - a), 2 * (1 - a)), r1, 1e-12);
  EXPECT_THROW(sobolev_bound_ratio(f, 0.0, 1.0), ArgumentError);
}

TEST(SobolevRatio, BoundedOverDyadicFamily) {
  double lo = 1e300, hi = 0.0;
  for (int e = 2; e <= 6; ++e) {
    const double a = std::ldexp(1.0, -e);
    const double area = a * a;
    const CosineField f =
        CosineField::indicator(256, Box{{0.5 - a / 2, 0.5 - a / 2}, {0.5 + a / 2, 0.5 + a / 2}}).centered();
    const double r = sobolev_bound_ratio(f, 2 * area * (1 - area), 1 - area);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  EXPECT_GT(lo, 0.05);
  EXPECT_LT(hi, 0.25);
  EXPECT_LT(hi / lo, 1.5);
}

TEST(FlowMap, IdentityForUniform) {
  FlowMapOptions opt;
  opt.grid = 17;
  const FlowMap map = heat_flow_map(uniform_density(Polygon::unit_square()), opt);
  for (int j = 0; j < map.grid; ++j) {
    for (int i = 0; i < map.grid; ++i) EXPECT_EQ(map.at(i, j), map.node(i, j));
  }
}

TEST(FlowMap, PerturbativeAgreementAndBoundary) {
  const double eps = 0.05;
  const FlowMap map = heat_flow_map(cosine_bump(eps, 1, 0));
  double err = 0.0;
  for (int j = 0; j < map.grid; ++j) {
    for (int i = 0; i < map.grid; ++i) {
      const Point p = map.node(i, j);
      const Point t = map.at(i, j);
      err = std::max(err, distance(t, {p.x + eps / kPi * std::sin(kPi * p.x), p.y}));
      EXPECT_TRUE(t.x >= 0 && t.x <= 1 && t.y >= 0 && t.y <= 1);
      if (i == 0) {
        EXPECT_NEAR(t.x, 0.0, 1e-12);
      }
      if (i == map.grid - 1) {
        EXPECT_NEAR(t.x, 1.0, 1e-12);
      }
      if (j == 0) {
        EXPECT_NEAR(t.y, 0.0, 1e-12);
      }
      if (j == map.grid - 1) {
        EXPECT_NEAR(t.y, 1.0, 1e-12);
      }
    }
  }
  EXPECT_LE(err, 10 * eps * eps);
  EXPECT_GE(map.lip * map.lip_inverse, 1.0);
  EXPECT_LE(map.lip, 1.0 + 5.0 * map.holder_norm);
}

TEST(FlowMap, PushforwardIsUniform) {
  const DensitySpec spec = cosine_bump(0.05, 1, 0);
  const FlowMap map = heat_flow_map(spec);
  auto pts = sample_points(spec, 100000, 17).points;
  EXPECT_LT(chi_square_test(pts, {{0, 0}, {1, 1}}, 8).p_value, 1e-4);  // before the map: not uniform
  for (Point& p : pts) p = map(p);
  EXPECT_GT(chi_square_test(pts, {{0, 0}, {1, 1}}, 8).p_value, 1e-4);
}

TEST(FlowMap, RefusesLargePerturbation) {
  EXPECT_THROW(heat_flow_map(cosine_bump(0.3, 1, 0)), SolverRefusal);
}

TEST(Peyre, EqualMeasuresGiveZero) {
  const CosineField one = CosineField::mode(8, 0, 0, 1.0);
  EXPECT_EQ(peyre_ratio(one, one, 16).ratio, 0.0);
}

TEST(Peyre, SingleModeNearHalf) {
  CosineField mu = CosineField::mode(8, 0, 0, 1.0);
  mu.at(1, 0) = 0.1 / std::numbers::sqrt2;
  const PeyreRatio r = peyre_ratio(mu, CosineField::mode(8, 0, 0, 1.0), 32);
  // W2 ~ eps / (sqrt 2 pi), bound = 2 eps / (sqrt 2 pi): ratio 1/2 in the continuum.
  EXPECT_NEAR(r.bound, 2 * 0.1 / (std::numbers::sqrt2 * kPi), 1e-12);
  EXPECT_GT(r.ratio, 0.45);
  EXPECT_LT(r.ratio, 0.6);
}

TEST(Peyre, ProductModeBelowOne) {
  CosineField mu = CosineField::mode(8, 0, 0, 1.0);
  mu.at(1, 1) = 0.1 / 2.0;
  EXPECT_LE(peyre_ratio(mu, CosineField::mode(8, 0, 0, 1.0), 32).ratio, 1.0);
}
