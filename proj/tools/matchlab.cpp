// matchlab command-line driver.
//
//   matchlab sample       --n N [--config c.json] [--seed S] [--out pts.json]
//   matchlab solve        --n N [--m M] | --x a.json --y b.json   [--p 2]
//   matchlab wb           like solve, on --domain (default unit square)
//   matchlab semidiscrete --n N [--K 16] [--config c.json]
//   matchlab decompose    --delta D [--r 0.25] [--domain poly.json]
//   matchlab spectral     --preset cos|coscos|half-square [--N 256] | --field f.json
//   matchlab tsp          --n N [--exact]
//   matchlab experiment   --config c.json [--set key=value]... [--out-dir dir]
//   matchlab fit          --records r.csv|r.json [--variant v]
//
// Exit status: 0 ok, 1 bad arguments or input, 2 solver refusal.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "matchlab/density.hpp"
#include "matchlab/domain.hpp"
#include "matchlab/error.hpp"
#include "matchlab/io.hpp"
#include "matchlab/montecarlo.hpp"
#include "matchlab/seed.hpp"
#include "matchlab/spectral.hpp"
#include "matchlab/transport.hpp"
#include "matchlab/tsp.hpp"

namespace {

using namespace matchlab;
using io::json;

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("MATCHLAB_SEED");
  if (s == nullptr || *s == '\0') return std::nullopt;
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(s, &pos);
    if (s[pos] != '\0') throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw ArgumentError(std::string("MATCHLAB_SEED is not an unsigned integer: ") + s);
  }
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    io::write_file(out, text);
  }
}

void emit(const std::string& out, const json& j) { emit(out, j.dump(2) + "\n"); }

struct Common {
  std::string config;
  std::string domain;
  std::string out;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t m = 0;
  double p = 2.0;
  std::string xs_file;
  std::string ys_file;
};

DensitySpec density_of(const Common& c) {
  if (!c.config.empty()) return io::load_config(c.config, c.overrides).density_spec();
  const Polygon poly = c.domain.empty() ? Polygon::unit_square() : io::load_polygon(c.domain);
  return uniform_density(poly);
}

std::uint64_t seed_of(const Common& c) {
  if (const auto s = env_seed()) return *s;
  return c.seed;
}

// Both families: from files, or sampled from streams 1 and 2 of the seed.
std::pair<std::vector<Point>, std::vector<Point>> point_families(const Common& c, const DensitySpec& spec) {
  if (!c.xs_file.empty() || !c.ys_file.empty()) {
    if (c.xs_file.empty() || c.ys_file.empty()) throw ArgumentError("--x and --y go together");
    return {io::points_from_json(io::parse_json(io::read_file(c.xs_file), c.xs_file)),
            io::points_from_json(io::parse_json(io::read_file(c.ys_file), c.ys_file))};
  }
  if (c.n == 0) throw ArgumentError("--n is required without --x/--y");
  const std::size_t m = c.m == 0 ? c.n : c.m;
  const std::uint64_t s = seed_of(c);
  return {sample_points(spec, c.n, derive_seed(s, trial_key(c.n, 0), Stream::kFirstFamily)).points,
          sample_points(spec, m, derive_seed(s, trial_key(c.n, 0), Stream::kSecondFamily)).points};
}

void add_sampling(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config supplying domain and density");
  cmd->add_option("--set", c.overrides, "dot-path override key=value (repeatable)");
  cmd->add_option("--domain", c.domain, "polygon file (JSON array of [x,y])");
  cmd->add_option("--seed", c.seed, "seed (MATCHLAB_SEED takes precedence)");
  cmd->add_option("--n", c.n, "number of points");
  cmd->add_option("--out,-o", c.out, "output file (default stdout)");
}

int run(int argc, char** argv) {
  CLI::App app{"matchlab: random matching and optimal transport experiments"};
  app.require_subcommand(1);
  Common c;

  auto* sample = app.add_subcommand("sample", "sample points from a density");
  add_sampling(sample, c);

  auto* solve = app.add_subcommand("solve", "exact W_p^p between two point families");
  auto* wb = app.add_subcommand("wb", "exact boundary transport Wb_p^p");
  for (auto* cmd : {solve, wb}) {
    add_sampling(cmd, c);
    cmd->add_option("--m", c.m, "size of the second family (default n)");
    cmd->add_option("--x", c.xs_file, "first family, JSON array of [x,y]");
    cmd->add_option("--y", c.ys_file, "second family, JSON array of [x,y]");
    cmd->add_option("--p", c.p, "cost exponent");
  }

  double grid_factor = 16.0;
  bool semi_boundary = false;
  auto* semi = app.add_subcommand("semidiscrete", "W_p^p from an empirical measure to the grid-discretized density");
  add_sampling(semi, c);
  semi->add_option("--K", grid_factor, "grid cells per point");
  semi->add_option("--p", c.p, "cost exponent");
  semi->add_flag("--boundary", semi_boundary, "boundary variant");
  bool with_plan = false;
  for (auto* cmd : {solve, wb, semi}) cmd->add_flag("--plan", with_plan, "include the coupling in the output");

  double delta = 0.0, ratio = 0.25;
  auto* decompose = app.add_subcommand("decompose", "merged Whitney decomposition");
  decompose->add_option("--domain", c.domain, "polygon file (default unit square)");
  decompose->add_option("--delta", delta, "boundary scale delta")->required();
  decompose->add_option("--r", ratio, "dyadic refinement ratio");
  decompose->add_option("--out,-o", c.out, "output file");

  std::string preset, field_file, export_file;
  int resolution = 256;
  auto* spectral = app.add_subcommand("spectral", "negative Sobolev norm of a cosine field");
  spectral->add_option("--preset", preset, "cos | coscos | half-square")
      ->check(CLI::IsMember({"cos", "coscos", "half-square"}));
  spectral->add_option("--field", field_file, "field JSON {N, coefficients}");
  spectral->add_option("--N", resolution, "resolution for presets");
  spectral->add_option("--export", export_file, "write the field JSON");
  spectral->add_option("--out,-o", c.out, "output file");

  bool exact = false;
  auto* tsp = app.add_subcommand("tsp", "bipartite travelling salesman tour");
  add_sampling(tsp, c);
  tsp->add_flag("--exact", exact, "exact dynamic program (n <= 10)");

  std::string out_dir = ".";
  unsigned threads = 0;
  bool no_timing = false;
  auto* experiment = app.add_subcommand("experiment", "run a trial ladder");
  experiment->add_option("--config", c.config, "experiment config")->required();
  experiment->add_option("--set", c.overrides, "dot-path override key=value (repeatable)");
  experiment->add_option("--out-dir", out_dir, "directory for records.csv, records.json, fit.json, summary.json");
  experiment->add_option("--threads", threads, "worker cap (default: available parallelism)");
  experiment->add_flag("--no-timing", no_timing, "write wall_ms as 0 for byte-reproducible artifacts");

  std::string records_file, variant_filter;
  std::size_t min_trials = 30;
  auto* fit = app.add_subcommand("fit", "slope of n * cost against log n");
  fit->add_option("--records", records_file, "records CSV or JSON")->required();
  fit->add_option("--variant", variant_filter, "restrict to one variant");
  fit->add_option("--min-trials", min_trials, "trials required per n");
  fit->add_option("--out,-o", c.out, "output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "matchlab: " << e.what() << "\n";
    return 1;
  }

  if (sample->parsed()) {
    if (c.n == 0) throw ArgumentError("--n is required");
    const DensitySpec spec = density_of(c);
    const std::uint64_t s = derive_seed(seed_of(c), trial_key(c.n, 0), Stream::kFirstFamily);
    emit(c.out, io::points_to_json(sample_points(spec, c.n, s).points));
  } else if (solve->parsed() || wb->parsed()) {
    const DensitySpec spec = density_of(c);
    const auto [xs, ys] = point_families(c, spec);
    const AtomicMeasure mu = AtomicMeasure::uniform(xs);
    const AtomicMeasure nu = AtomicMeasure::uniform(ys);
    const TransportPlan plan = solve->parsed() ? transport_cost(mu, nu, c.p)
                                               : boundary_transport_cost(mu, nu, spec.domain(), c.p);
    json j = {{"n", xs.size()}, {"m", ys.size()}, {"cost", plan.total_cost},
              {"dual_objective", plan.dual_objective(mu, nu)}};
    if (with_plan) j["plan"] = io::plan_to_json(plan);
    emit(c.out, j);
  } else if (semi->parsed()) {
    if (c.n == 0) throw ArgumentError("--n is required");
    const DensitySpec spec = density_of(c);
    const auto xs = sample_points(spec, c.n, derive_seed(seed_of(c), trial_key(c.n, 0), Stream::kFirstFamily)).points;
    const SemidiscreteResult r = semidiscrete_cost(xs, spec, grid_factor, c.p, semi_boundary);
    json j = {{"n", c.n}, {"grid_atoms", r.grid_atoms}, {"h", r.h}, {"bias_bound", r.bias_bound}, {"cost", r.cost}};
    if (with_plan) j["plan"] = io::plan_to_json(r.plan);
    emit(c.out, j);
  } else if (decompose->parsed()) {
    const Polygon poly = c.domain.empty() ? Polygon::unit_square() : io::load_polygon(c.domain);
    emit(c.out, io::decomposition_to_json(merged_decomposition(poly, delta, ratio)));
  } else if (spectral->parsed()) {
    if (preset.empty() == field_file.empty()) throw ArgumentError("give exactly one of --preset and --field");
    CosineField f;
    if (!field_file.empty()) {
      f = io::field_from_json(io::parse_json(io::read_file(field_file), field_file));
    } else if (preset == "cos") {
      f = CosineField::mode(resolution, 1, 0, 1.0);
    } else if (preset == "coscos") {
      f = CosineField::mode(resolution, 1, 1, 1.0);
    } else {
      f = CosineField::indicator(resolution, Box{{0.0, 0.0}, {0.5, 1.0}}).centered();
    }
    if (!export_file.empty()) emit(export_file, io::field_to_json(f));
    const HMinus1Norm h = hminus1_norm(f);
    emit(c.out, json{{"N", f.resolution()}, {"hminus1_squared", h.squared}, {"tail_bound", h.remainder}});
  } else if (tsp->parsed()) {
    if (c.n == 0) throw ArgumentError("--n is required");
    if (exact && c.n > static_cast<std::size_t>(kExactTspLimit)) {
      throw SolverRefusal("exact bipartite TSP is limited to n <= " + std::to_string(kExactTspLimit) + " (got " +
                          std::to_string(c.n) + ")");
    }
    const DensitySpec spec = density_of(c);
    const auto [xs, ys] = point_families(c, spec);
    emit(c.out, io::tour_to_json(exact ? bipartite_tsp_exact(xs, ys) : bipartite_tsp_heuristic(xs, ys)));
  } else if (experiment->parsed()) {
    ExperimentConfig cfg = io::load_config(c.config, c.overrides);
    if (const auto s = env_seed()) cfg.master_seed = *s;
    const std::vector<TrialRecord> records = run_experiment(cfg, threads);
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    io::write_file((dir / "records.csv").string(), io::records_to_csv(records, !no_timing));
    io::write_file((dir / "records.json").string(), io::records_to_json(records, !no_timing).dump(2) + "\n");
    io::write_file((dir / "summary.json").string(), io::summary_to_json(summarize(records)).dump(2) + "\n");
    json fit_json;
    try {
      fit_json = io::fit_to_json(fit_slope(records));
    } catch (const ArgumentError& e) {
      fit_json = {{"error", e.what()}};
      std::cerr << "matchlab: no slope fit: " << e.what() << "\n";
    }
    io::write_file((dir / "fit.json").string(), fit_json.dump(2) + "\n");
    std::cerr << "matchlab: " << records.size() << " records written to " << out_dir << "\n";
  } else if (fit->parsed()) {
    const std::string text = io::read_file(records_file);
    const bool is_json = !text.empty() && text.find_first_not_of(" \t\r\n") != std::string::npos &&
                         text[text.find_first_not_of(" \t\r\n")] == '[';
    const std::vector<TrialRecord> records =
        is_json ? io::records_from_json(io::parse_json(text, records_file)) : io::records_from_csv(text);
    std::optional<Variant> filter;
    if (!variant_filter.empty()) filter = variant_from_string(variant_filter);
    emit(c.out, io::fit_to_json(fit_slope(records, filter, min_trials)));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const matchlab::SolverRefusal& e) {
    std::cerr << "matchlab: refused: " << e.what() << "\n";
    return 2;
  } catch (const matchlab::ArgumentError& e) {
    std::cerr << "matchlab: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "matchlab: " << e.what() << "\n";
    return 1;
  }
}
