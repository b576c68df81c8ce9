#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + MATCHLAB_CLI + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("matchlab_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

const std::string kConfigs = MATCHLAB_CONFIGS;
const std::string kSmall = " --set n_ladder=[16,32,64] --set trials=30";

}  // namespace

TEST(Cli, ExperimentWritesArtifacts) {
  const fs::path d = scratch("exp");
  ASSERT_EQ(run("experiment --config " + kConfigs + "/bipartite_square.json" + kSmall + " --out-dir " + d.string()), 0);
  for (const char* f : {"records.csv", "records.json", "fit.json", "summary.json"}) EXPECT_TRUE(fs::exists(d / f)) << f;
  const auto fit = nlohmann::json::parse(slurp(d / "fit.json"));
  EXPECT_TRUE(fit.contains("slope"));
  EXPECT_TRUE(fit.contains("stderr"));
  const std::string csv = slurp(d / "records.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "variant,n,m,trial,seed,raw_cost,normalized_cost,wall_ms");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 91);
  fs::remove_all(d);
}

TEST(Cli, ByteIdenticalReruns) {
  const fs::path a = scratch("a"), b = scratch("b");
  const std::string base = "experiment --config " + kConfigs + "/injective_square.json" + kSmall + " --no-timing";
  ASSERT_EQ(run(base + " --threads 1 --out-dir " + a.string()), 0);
  ASSERT_EQ(run(base + " --threads 4 --out-dir " + b.string()), 0);
  for (const char* f : {"records.csv", "records.json", "fit.json", "summary.json"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, SeedFromEnvironment) {
  const fs::path a = scratch("ea"), b = scratch("eb");
  const std::string base = "experiment --config " + kConfigs + "/bipartite_square.json" + kSmall + " --no-timing";
  ASSERT_EQ(run(base + " --out-dir " + a.string(), "MATCHLAB_SEED=99"), 0);
  ASSERT_EQ(run(base + " --out-dir " + b.string() + " --set master_seed=99"), 0);
  EXPECT_EQ(slurp(a / "records.csv"), slurp(b / "records.csv"));
  EXPECT_EQ(run(base + " --out-dir " + a.string(), "MATCHLAB_SEED=abc"), 1);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, MissingConfigIsArgumentError) {
  EXPECT_EQ(run("experiment --config /nonexistent/config.json"), 1);
  EXPECT_EQ(run("experiment"), 1);
  EXPECT_EQ(run("nonsense"), 1);
  EXPECT_EQ(run(""), 1);
}

TEST(Cli, ExactTourBeyondCapIsRefusal) {
  EXPECT_EQ(run("tsp --exact --n 12"), 2);
  EXPECT_EQ(run("tsp --exact --n 6"), 0);
  EXPECT_EQ(run("tsp --n 200"), 0);
}

TEST(Cli, SingleSolves) {
  const fs::path d = scratch("solve");
  ASSERT_EQ(run("solve --n 50 --m 80 --plan -o " + (d / "w.json").string()), 0);
  ASSERT_EQ(run("wb --n 50 --m 80 --plan -o " + (d / "wb.json").string()), 0);
  const auto w = nlohmann::json::parse(slurp(d / "w.json"));
  const auto wb = nlohmann::json::parse(slurp(d / "wb.json"));
  EXPECT_LE(wb["cost"].get<double>(), w["cost"].get<double>());
  bool sentinel = false;
  for (const auto& e : wb["plan"]["entries"]) sentinel |= e["source"] == "B" || e["target"] == "B′";
  EXPECT_TRUE(sentinel);
  EXPECT_EQ(run("semidiscrete --n 64 --K 16 -o " + (d / "sd.json").string()), 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(d / "sd.json"))["grid_atoms"].get<int>(), 1024);
  EXPECT_EQ(run("sample --n 10 --config " + kConfigs + "/bipartite_affine.json -o " + (d / "s.json").string()), 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(d / "s.json")).size(), 10u);
  // Points files round-trip through solve.
  ASSERT_EQ(run("sample --n 20 --seed 3 -o " + (d / "x.json").string()), 0);
  ASSERT_EQ(run("sample --n 20 --seed 4 -o " + (d / "y.json").string()), 0);
  EXPECT_EQ(run("solve --x " + (d / "x.json").string() + " --y " + (d / "y.json").string()), 0);
  EXPECT_EQ(run("solve --x " + (d / "x.json").string()), 1);
  fs::remove_all(d);
}

TEST(Cli, DecomposeAndSpectral) {
  const fs::path d = scratch("dec");
  ASSERT_EQ(run("decompose --delta 0.0625 --domain " + kConfigs + "/l_shape.json -o " + (d / "dec.json").string()), 0);
  const auto dec = nlohmann::json::parse(slurp(d / "dec.json"));
  double area = 0.0;
  for (const auto& c : dec["cells"]) area += c["area"].get<double>();
  EXPECT_NEAR(area, 3.0, 1e-9);
  EXPECT_EQ(run("decompose --delta 0.5 --domain " + kConfigs + "/l_shape.json"), 2);
  ASSERT_EQ(run("spectral --preset cos --N 64 --export " + (d / "f.json").string() + " -o " +
                (d / "h.json").string()),
            0);
  const auto h = nlohmann::json::parse(slurp(d / "h.json"));
  EXPECT_NEAR(h["hminus1_squared"].get<double>(), 0.050660591821168885, 1e-12);
  EXPECT_EQ(run("spectral --field " + (d / "f.json").string()), 0);
  EXPECT_EQ(run("spectral"), 1);
  fs::remove_all(d);
}

TEST(Cli, FitFromRecords) {
  const fs::path d = scratch("fit");
  ASSERT_EQ(run("experiment --config " + kConfigs + "/semidiscrete_square.json" + kSmall + " --out-dir " + d.string()),
            0);
  EXPECT_EQ(run("fit --records " + (d / "records.csv").string() + " -o " + (d / "f1.json").string()), 0);
  EXPECT_EQ(run("fit --records " + (d / "records.json").string() + " -o " + (d / "f2.json").string()), 0);
  EXPECT_EQ(slurp(d / "f1.json"), slurp(d / "f2.json"));
  EXPECT_EQ(slurp(d / "f1.json"), slurp(d / "fit.json"));
  EXPECT_EQ(run("fit --records " + (d / "records.csv").string() + " --min-trials 100"), 1);
  fs::remove_all(d);
}

TEST(Cli, RelativeDomainInConfig) {
  const fs::path d = scratch("lshape");
  EXPECT_EQ(run("experiment --config " + kConfigs + "/semidiscrete_lshape.json --set trials=2 --out-dir " + d.string()),
            0);
  fs::remove_all(d);
}
