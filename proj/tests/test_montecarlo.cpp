#include <gtest/gtest.h>

#include <cmath>

#include "matchlab/io.hpp"
#include "matchlab/montecarlo.hpp"

using namespace matchlab;

namespace {

ExperimentConfig small(Variant v) {
  ExperimentConfig c;
  c.variant = v;
  c.n_ladder = {16, 32, 64};
  c.trials = 4;
  c.master_seed = 2024;
  if (v == Variant::kInjective) c.m_rule.kind = MRule::Kind::kOffset;
  return c;
}

TrialRecord record(std::size_t n, double raw) {
  TrialRecord r;
  r.n = n;
  r.raw_cost = raw;
  r.normalized_cost = normalized(raw, n);
  return r;
}

}  // namespace

TEST(Config, Validation) {
  ExperimentConfig c = small(Variant::kBipartite);
  EXPECT_NO_THROW(c.validate());
  c.n_ladder = {32, 16};
  EXPECT_THROW(c.validate(), ArgumentError);
  c = small(Variant::kBipartite);
  c.trials = 0;
  EXPECT_THROW(c.validate(), ArgumentError);
  c = small(Variant::kBipartite);
  c.m_rule = {MRule::Kind::kRatio, 0.5};
  EXPECT_THROW(c.validate(), ArgumentError);
}

TEST(Config, MRule) {
  EXPECT_EQ((MRule{MRule::Kind::kEqual, 1})(100), 100u);
  EXPECT_EQ((MRule{MRule::Kind::kRatio, 2})(100), 200u);
  EXPECT_EQ((MRule{MRule::Kind::kOffset, 1})(256), 258u);   // floor(sqrt(log 256)) = 2
  EXPECT_EQ((MRule{MRule::Kind::kOffset, 1})(2048), 2050u);  // floor(sqrt(7.62)) = 2
}

TEST(Config, JsonAndOverrides) {
  io::json j = {{"schema_version", 1},
                {"variant", "bipartite"},
                {"n_ladder", {8, 16, 32}},
                {"trials", 3},
                {"master_seed", 7},
                {"density", {{"family", "affine"}, {"params", {{"a", {0.5, 0.0}}}}}}};
  io::apply_override(j, "solver.K=8");
  io::apply_override(j, "m_rule.kind=ratio");
  io::apply_override(j, "m_rule.q=2");
  io::apply_override(j, "variant=semidiscrete");
  const ExperimentConfig c = io::config_from_json(j);
  EXPECT_EQ(c.grid_factor, 8.0);
  EXPECT_EQ(c.m_rule.kind, MRule::Kind::kRatio);
  EXPECT_EQ(c.m_rule.q, 2.0);
  EXPECT_EQ(c.variant, Variant::kSemidiscrete);
  EXPECT_EQ(c.density.family, DensityFamily::kAffine);
  EXPECT_EQ(c.density.params.affine.x, 0.5);
  // Round trip.
  const ExperimentConfig d = io::config_from_json(io::config_to_json(c));
  EXPECT_EQ(io::config_to_json(d), io::config_to_json(c));

  io::json bad = j;
  bad.erase("schema_version");
  EXPECT_THROW(io::config_from_json(bad), ArgumentError);
  bad = j;
  bad["schema_version"] = 2;
  EXPECT_THROW(io::config_from_json(bad), ArgumentError);
  EXPECT_THROW(io::apply_override(j, "novalue"), ArgumentError);
}

TEST(Experiment, DeterministicAcrossThreads) {
  for (Variant v : {Variant::kBipartite, Variant::kSemidiscrete, Variant::kBoundaryBipartite,
                    Variant::kBoundarySemidiscrete, Variant::kInjective, Variant::kTsp}) {
    const ExperimentConfig c = small(v);
    const auto a = run_experiment(c, 1);
    const auto b = run_experiment(c, 3);
    EXPECT_EQ(io::records_to_csv(a, false), io::records_to_csv(b, false)) << to_string(v);
    EXPECT_EQ(io::records_to_json(a, false).dump(), io::records_to_json(b, false).dump()) << to_string(v);
  }
}

TEST(Experiment, CanonicalOrderAndSeeds) {
  const ExperimentConfig c = small(Variant::kBipartite);
  const auto r = run_experiment(c, 2);
  ASSERT_EQ(r.size(), 12u);
  for (std::size_t i = 0; i < r.size(); ++i) {
    EXPECT_EQ(r[i].n, c.n_ladder[i / 4]);
    EXPECT_EQ(r[i].trial, static_cast<int>(i % 4));
    EXPECT_EQ(r[i].seed, derive_seed(c.master_seed, trial_key(r[i].n, static_cast<std::uint64_t>(r[i].trial)),
                                     Stream::kFirstFamily));
  }
  ExperimentConfig other = c;
  other.master_seed = 2025;
  EXPECT_NE(io::records_to_csv(run_experiment(other, 1), false), io::records_to_csv(r, false));
}

TEST(Experiment, BipartiteBounded) {
  const ExperimentConfig c = small(Variant::kBipartite);
  for (const TrialRecord& r : run_experiment(c, 1)) {
    EXPECT_GE(r.raw_cost, 0.0);
    EXPECT_LE(r.raw_cost, 2.0);  // diam^2 of the unit square
    EXPECT_TRUE(std::isfinite(r.normalized_cost));
    EXPECT_EQ(r.m, r.n);
  }
}

TEST(Experiment, BoundaryBelowWRecordwise) {
  const auto w = run_experiment(small(Variant::kBipartite), 1);
  const auto wb = run_experiment(small(Variant::kBoundaryBipartite), 1);
  ASSERT_EQ(w.size(), wb.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_EQ(w[i].seed, wb[i].seed);
    EXPECT_EQ(*wb[i].reference, w[i].raw_cost);
    EXPECT_LE(wb[i].raw_cost, w[i].raw_cost * (1 + 1e-9));
  }
}

TEST(Experiment, InjectiveSandwich) {
  for (const TrialRecord& r : run_experiment(small(Variant::kInjective), 1)) {
    const double n = static_cast<double>(r.n);
    EXPECT_EQ(r.m, (MRule{MRule::Kind::kOffset, 1}(r.n)));
    EXPECT_LE(r.raw_cost, *r.reference * (1 + 1e-12));
    EXPECT_LE(*r.full, r.raw_cost + 2.0 * static_cast<double>(r.m - r.n) / n + 1e-12);
  }
}

TEST(Experiment, TspAboveTwiceMatching) {
  for (const TrialRecord& r : run_experiment(small(Variant::kTsp), 1)) EXPECT_GE(r.raw_cost, *r.reference);
}

TEST(Experiment, RefusalCarriesContext) {
  ExperimentConfig c = small(Variant::kBipartite);
  c.n_ladder = {4, 8, 16};
  c.variant = Variant::kTsp;
  c.m_rule = {MRule::Kind::kRatio, 2};
  EXPECT_THROW(run_experiment(c, 1), ArgumentError);
}

TEST(Fit, RecoversExactLine) {
  std::vector<TrialRecord> recs;
  for (std::size_t n : {256u, 512u, 1024u, 2048u}) {
    for (int t = 0; t < 30; ++t) {
      const double target = 0.159 * std::log(static_cast<double>(n)) + 0.5;
      recs.push_back(record(n, target / static_cast<double>(n)));
    }
  }
  const SlopeFit f = fit_slope(recs);
  EXPECT_NEAR(f.slope, 0.159, 1e-12);
  EXPECT_NEAR(f.intercept, 0.5, 1e-12);
  EXPECT_NEAR(f.stderr_slope, 0.0, 1e-12);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  EXPECT_EQ(f.points, 4u);
}

TEST(Fit, StderrFromPerNVariance) {
  // Alternating 1 +- 0.3 at every n.
  std::vector<TrialRecord> recs;
  const std::vector<std::size_t> ns{100, 1000, 10000};
  for (std::size_t n : ns) {
    for (int t = 0; t < 30; ++t) {
      const double v = 1.0 + (t % 2 == 0 ? 0.3 : -0.3);
      recs.push_back(record(n, v / static_cast<double>(n)));
    }
  }
  const SlopeFit f = fit_slope(recs);
  double mx = 0.0;
  for (std::size_t n : ns) mx += std::log(static_cast<double>(n)) / 3;
  double sxx = 0.0;
  for (std::size_t n : ns) sxx += std::pow(std::log(static_cast<double>(n)) - mx, 2);
  const double var_mean = 0.09 * 30.0 / 29.0 / 30.0;
  EXPECT_NEAR(f.stderr_slope, std::sqrt(var_mean / sxx), 1e-12);
  EXPECT_NEAR(f.slope, 0.0, 1e-12);
}

TEST(Fit, InsufficientData) {
  std::vector<TrialRecord> recs;
  for (std::size_t n : {10u, 20u}) {
    for (int t = 0; t < 40; ++t) recs.push_back(record(n, 0.1));
  }
  EXPECT_THROW(fit_slope(recs), ArgumentError);
  for (int t = 0; t < 10; ++t) recs.push_back(record(40, 0.1));
  EXPECT_THROW(fit_slope(recs), ArgumentError);
  EXPECT_NO_THROW(fit_slope(recs, std::nullopt, 10));
}

TEST(Summary, SingleRecordIsDegenerate) {
  const auto s = summarize({record(64, 0.02)});
  ASSERT_EQ(s.size(), 1u);
  EXPECT_TRUE(s[0].degenerate);
  EXPECT_DOUBLE_EQ(s[0].mean, normalized(0.02, 64));
  EXPECT_EQ(s[0].ci_low, s[0].ci_high);
  EXPECT_THROW(summarize({}), ArgumentError);
}

TEST(Summary, DuplicatesHaveZeroVariance) {
  const auto s = summarize({record(64, 0.02), record(64, 0.02), record(64, 0.02)});
  EXPECT_EQ(s[0].variance, 0.0);
  EXPECT_FALSE(s[0].degenerate);
}

TEST(Summary, IntervalShrinksWithTrials) {
  ExperimentConfig c = small(Variant::kBipartite);
  c.n_ladder = {128};
  c.trials = 50;
  const auto a = summarize(run_experiment(c, 0));
  c.trials = 200;
  const auto b = summarize(run_experiment(c, 0));
  const double wa = a[0].ci_high - a[0].ci_low;
  const double wb = b[0].ci_high - b[0].ci_low;
  EXPECT_GT(wa / wb, 2.0 * 0.7);
  EXPECT_LT(wa / wb, 2.0 / 0.7);
}

TEST(Records, CsvRoundTrip) {
  const auto r = run_experiment(small(Variant::kInjective), 1);
  const std::string csv = io::records_to_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "variant,n,m,trial,seed,raw_cost,normalized_cost,wall_ms");
  const auto back = io::records_from_csv(csv);
  ASSERT_EQ(back.size(), r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    EXPECT_EQ(back[i].raw_cost, r[i].raw_cost);
    EXPECT_EQ(back[i].seed, r[i].seed);
    EXPECT_EQ(back[i].m, r[i].m);
  }
  const auto from_json = io::records_from_json(io::records_to_json(r));
  EXPECT_EQ(*from_json[0].full, *r[0].full);
}
