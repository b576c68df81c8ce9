#include <gtest/gtest.h>

#include <random>

#include "matchlab/assignment.hpp"
#include "matchlab/seed.hpp"

using namespace matchlab;

namespace {

std::vector<Point> random_points(std::mt19937_64& rng, std::size_t n) {
  std::vector<Point> v(n);
  for (Point& p : v) p = {uniform01(rng), uniform01(rng)};
  return v;
}

}  // namespace

TEST(Matching, SinglePair) {
  const std::vector<Point> x{{0, 0}}, y{{0.3, 0.4}};
  EXPECT_NEAR(matching_cost(x, y, 2).cost, 0.25, 1e-15);
}

TEST(Matching, IdentityPairing) {
  const std::vector<Point> x{{0, 0}, {1, 0}}, y{{0.1, 0}, {0.9, 0}};
  const MatchingResult r = matching_cost(x, y, 2);
  EXPECT_NEAR(r.cost, 0.02, 1e-15);
  EXPECT_EQ(r.assignment, (std::vector<int>{0, 1}));
}

TEST(Matching, Errors) {
  const std::vector<Point> x{{0, 0}, {1, 0}}, y{{0.1, 0}};
  EXPECT_THROW(matching_cost(x, y, 2), ArgumentError);
  EXPECT_DOUBLE_EQ(matching_cost({}, y, 2).cost, 0.0);
  EXPECT_THROW(matching_cost(y, x, 0.5), ArgumentError);
}

TEST(Oracle, SymmetricTie) {
  const std::vector<Point> x{{0, 0}, {1, 1}}, y{{1, 0}, {0, 1}};
  EXPECT_DOUBLE_EQ(brute_force_oracle(x, y, 2), 2.0);
  EXPECT_DOUBLE_EQ(matching_cost(x, y, 2).cost, 2.0);
}

TEST(Oracle, SinglePointTakesNearest) {
  std::mt19937_64 rng(5);
  const auto x = random_points(rng, 1);
  const auto y = random_points(rng, 6);
  double best = 1e300;
  for (Point q : y) best = std::min(best, squared_norm(x[0] - q));
  EXPECT_DOUBLE_EQ(brute_force_oracle(x, y, 2), best);
}

TEST(Oracle, RefusesLarge) {
  std::mt19937_64 rng(5);
  EXPECT_THROW(brute_force_oracle(random_points(rng, 3), random_points(rng, 9), 2), SolverRefusal);
}

TEST(Oracle, ThreeByFiveSeedSeven) {
  std::mt19937_64 rng(7);
  const auto x = random_points(rng, 3);
  const auto y = random_points(rng, 5);
  EXPECT_EQ(matching_cost(x, y, 2).cost, brute_force_oracle(x, y, 2));
}

// Exact agreement over all shapes n <= m <= 7 (acceptance runs 1000 each).
TEST(Oracle, ExactAgreementAllShapes) {
  for (std::size_t m = 1; m <= 7; ++m) {
    for (std::size_t n = 1; n <= m; ++n) {
      for (std::uint64_t s = 0; s < 100; ++s) {
        std::mt19937_64 rng(derive_seed(99, trial_key(n * 8 + m, s), Stream::kAuxiliary));
        const auto x = random_points(rng, n);
        const auto y = random_points(rng, m);
        for (double p : {1.0, 2.0}) {
          ASSERT_EQ(matching_cost(x, y, p).cost, brute_force_oracle(x, y, p)) << n << "x" << m << " seed " << s;
        }
      }
    }
  }
}

TEST(Matching, DualCertificate) {
  std::mt19937_64 rng(17);
  const auto x = random_points(rng, 40);
  const auto y = random_points(rng, 55);
  const MatchingResult r = matching_cost(x, y, 2);
  double dual = 0.0;
  for (double u : r.row_dual) dual += u;
  std::vector<bool> used(y.size(), false);
  for (int j : r.assignment) used[static_cast<std::size_t>(j)] = true;
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (used[j]) dual += r.col_dual[j];
  }
  EXPECT_NEAR(dual, r.cost, 1e-9 * r.cost);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < y.size(); ++j) {
      EXPECT_LE(r.row_dual[i] + r.col_dual[j], squared_norm(x[i] - y[j]) + 1e-12);
    }
  }
}
