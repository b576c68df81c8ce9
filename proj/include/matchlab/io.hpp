#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "matchlab/domain.hpp"
#include "matchlab/error.hpp"
#include "matchlab/geometry.hpp"
#include "matchlab/montecarlo.hpp"
#include "matchlab/spectral.hpp"
#include "matchlab/transport.hpp"
#include "matchlab/tsp.hpp"

namespace matchlab::io {

using nlohmann::json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write '" + path + "'");
  out << text;
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ArgumentError(what + ": " + e.what());
  }
}

// Shortest decimal that round-trips.
inline std::string format_double(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// ---- polygons

inline json polygon_to_json(const Polygon& poly) {
  json a = json::array();
  for (Point p : poly.vertices()) a.push_back({p.x, p.y});
  return a;
}

inline Polygon polygon_from_json(const json& j) {
  if (!j.is_array()) throw ArgumentError("polygon must be a JSON array of [x,y] pairs");
  std::vector<Point> pts;
  for (const json& v : j) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ArgumentError("polygon vertices must be [x,y] number pairs");
    }
    pts.push_back({v[0].get<double>(), v[1].get<double>()});
  }
  return Polygon(std::move(pts));
}

inline Polygon load_polygon(const std::string& path) {
  return polygon_from_json(parse_json(read_file(path), path));
}

// A domain is either an inline polygon or the path of a polygon file.
inline Polygon domain_from_json(const json& j) {
  if (j.is_string()) return load_polygon(j.get<std::string>());
  if (j.is_object() && j.contains("polygon")) return domain_from_json(j.at("polygon"));
  return polygon_from_json(j);
}

// ---- densities

inline json density_params_to_json(DensityFamily family, const DensityParams& p) {
  json j = json::object();
  switch (family) {
    case DensityFamily::kUniform: break;
    case DensityFamily::kAffine: j["a"] = {p.affine.x, p.affine.y}; break;
    case DensityFamily::kCosineBump:
      j["epsilon"] = p.epsilon;
      j["frequency"] = {p.freq_x, p.freq_y};
      break;
    case DensityFamily::kGrid: j["values"] = p.grid; break;
  }
  return j;
}

inline DensityConfig density_from_json(const json& j) {
  DensityConfig d;
  if (j.is_null()) return d;
  if (!j.is_object()) throw ArgumentError("density must be an object");
  try {
    d.family = density_family_from_string(j.value("family", std::string("uniform")));
    d.alpha = j.value("alpha", 1.0);
    const json params = j.value("params", json::object());
    if (params.contains("a")) {
      const json& a = params.at("a");
      d.params.affine = {a.at(0).get<double>(), a.at(1).get<double>()};
    }
    d.params.epsilon = params.value("epsilon", 0.0);
    if (params.contains("frequency")) {
      d.params.freq_x = params.at("frequency").at(0).get<int>();
      d.params.freq_y = params.at("frequency").at(1).get<int>();
    }
    if (params.contains("values")) d.params.grid = params.at("values").get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("density: ") + e.what());
  }
  return d;
}

inline json density_to_json(const DensitySpec& spec) {
  return {{"family", to_string(spec.family())},
          {"params", density_params_to_json(spec.family(), spec.params())},
          {"polygon", polygon_to_json(spec.domain())},
          {"alpha", spec.holder_exponent()}};
}

// ---- experiment config
//
// {
//   "schema_version": 1,
//   "variant": "bipartite" | "semidiscrete" | "boundary-bipartite" |
//              "boundary-semidiscrete" | "injective" | "tsp",
//   "domain": [[x,y],...] | "polygon.json",       default unit square
//   "density": {"family": ..., "params": {...}, "alpha": 1},
//   "n_ladder": [256, 512, 1024, 2048],
//   "m_rule": {"kind": "equal" | "ratio" | "offset", "q": 2},
//   "trials": 100,
//   "master_seed": 1,
//   "solver": {"K": 16, "p": 2}
// }

inline void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ArgumentError("override '" + assignment + "' is not key=value");
  std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  std::string pointer = "/";
  for (char c : path) pointer += c == '.' ? '/' : c;
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  try {
    cfg[json::json_pointer(pointer)] = value;
  } catch (const json::exception& e) {
    throw ArgumentError("override '" + assignment + "': " + e.what());
  }
}

inline ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ArgumentError("config must be a JSON object");
  ExperimentConfig c;
  try {
    if (!j.contains("schema_version")) throw ArgumentError("config lacks schema_version");
    c.schema_version = j.at("schema_version").get<int>();
    c.variant = variant_from_string(j.value("variant", std::string("bipartite")));
    if (j.contains("domain")) c.domain = domain_from_json(j.at("domain"));
    c.density = density_from_json(j.value("density", json()));
    if (!j.contains("n_ladder")) throw ArgumentError("config lacks n_ladder");
    c.n_ladder = j.at("n_ladder").get<std::vector<std::size_t>>();
    const json rule = j.value("m_rule", json::object());
    const std::string kind = rule.is_string() ? rule.get<std::string>() : rule.value("kind", std::string("equal"));
    if (kind == "equal") {
      c.m_rule.kind = MRule::Kind::kEqual;
    } else if (kind == "ratio") {
      c.m_rule.kind = MRule::Kind::kRatio;
      c.m_rule.q = rule.value("q", 1.0);
    } else if (kind == "offset") {
      c.m_rule.kind = MRule::Kind::kOffset;
    } else {
      throw ArgumentError("unknown m_rule '" + kind + "'");
    }
    c.trials = j.value("trials", 1);
    c.master_seed = j.value("master_seed", std::uint64_t{0});
    const json solver = j.value("solver", json::object());
    c.grid_factor = solver.value("K", 16.0);
    c.p = solver.value("p", 2.0);
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline json config_to_json(const ExperimentConfig& c) {
  json rule = {{"kind", c.m_rule.kind == MRule::Kind::kEqual   ? "equal"
                        : c.m_rule.kind == MRule::Kind::kRatio ? "ratio"
                                                               : "offset"}};
  if (c.m_rule.kind == MRule::Kind::kRatio) rule["q"] = c.m_rule.q;
  return {{"schema_version", c.schema_version},
          {"variant", to_string(c.variant)},
          {"domain", polygon_to_json(c.domain)},
          {"density",
           {{"family", to_string(c.density.family)},
            {"params", density_params_to_json(c.density.family, c.density.params)},
            {"alpha", c.density.alpha}}},
          {"n_ladder", c.n_ladder},
          {"m_rule", rule},
          {"trials", c.trials},
          {"master_seed", c.master_seed},
          {"solver", {{"K", c.grid_factor}, {"p", c.p}}}};
}

inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  json j = parse_json(read_file(path), path);
  for (const std::string& o : overrides) apply_override(j, o);
  // Polygon files are looked up next to the config.
  if (j.is_object() && j.contains("domain") && j["domain"].is_string()) {
    const std::filesystem::path domain(j["domain"].get<std::string>());
    if (domain.is_relative()) j["domain"] = (std::filesystem::path(path).parent_path() / domain).string();
  }
  return config_from_json(j);
}

// ---- records

inline std::string records_to_csv(const std::vector<TrialRecord>& records, bool timing = true) {
  std::string out = "variant,n,m,trial,seed,raw_cost,normalized_cost,wall_ms\n";
  for (const TrialRecord& r : records) {
    out += to_string(r.variant) + ',' + std::to_string(r.n) + ',' + std::to_string(r.m) + ',' +
           std::to_string(r.trial) + ',' + std::to_string(r.seed) + ',' + format_double(r.raw_cost) + ',' +
           format_double(r.normalized_cost) + ',' + (timing ? format_double(r.wall_ms) : std::string("0")) + '\n';
  }
  return out;
}

inline json records_to_json(const std::vector<TrialRecord>& records, bool timing = true) {
  json a = json::array();
  for (const TrialRecord& r : records) {
    json e = {{"variant", to_string(r.variant)}, {"n", r.n},
              {"m", r.m},                        {"trial", r.trial},
              {"seed", r.seed},                  {"raw_cost", r.raw_cost},
              {"normalized_cost", r.normalized_cost}, {"wall_ms", timing ? r.wall_ms : 0.0}};
    if (r.reference) e["reference"] = *r.reference;
    if (r.full) e["full"] = *r.full;
    a.push_back(std::move(e));
  }
  return a;
}

inline std::vector<TrialRecord> records_from_json(const json& a) {
  std::vector<TrialRecord> out;
  try {
    for (const json& e : a) {
      TrialRecord r;
      r.variant = variant_from_string(e.at("variant").get<std::string>());
      r.n = e.at("n").get<std::size_t>();
      r.m = e.at("m").get<std::size_t>();
      r.trial = e.at("trial").get<int>();
      r.seed = e.at("seed").get<std::uint64_t>();
      r.raw_cost = e.at("raw_cost").get<double>();
      r.normalized_cost = e.at("normalized_cost").get<double>();
      r.wall_ms = e.value("wall_ms", 0.0);
      if (e.contains("reference")) r.reference = e.at("reference").get<double>();
      if (e.contains("full")) r.full = e.at("full").get<double>();
      out.push_back(r);
    }
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("records: ") + e.what());
  }
  return out;
}

// Records from a CSV with the standard header.
inline std::vector<TrialRecord> records_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "variant,n,m,trial,seed,raw_cost,normalized_cost,wall_ms") {
    throw ArgumentError("records CSV lacks the expected header");
  }
  std::vector<TrialRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 8) throw ArgumentError("malformed records row: " + line);
    try {
      TrialRecord r;
      r.variant = variant_from_string(f[0]);
      r.n = std::stoull(f[1]);
      r.m = std::stoull(f[2]);
      r.trial = std::stoi(f[3]);
      r.seed = std::stoull(f[4]);
      r.raw_cost = std::stod(f[5]);
      r.normalized_cost = std::stod(f[6]);
      r.wall_ms = std::stod(f[7]);
      out.push_back(r);
    } catch (const std::logic_error&) {
      throw ArgumentError("malformed records row: " + line);
    }
  }
  return out;
}

inline json fit_to_json(const SlopeFit& f) {
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"stderr", f.stderr_slope}, {"r2", f.r2},
          {"points", f.points}};
}

inline json summary_to_json(const std::vector<SummaryRow>& rows) {
  json a = json::array();
  for (const SummaryRow& s : rows) {
    a.push_back({{"variant", to_string(s.variant)}, {"n", s.n}, {"trials", s.trials}, {"mean", s.mean},
                 {"variance", s.variance}, {"ci_low", s.ci_low}, {"ci_high", s.ci_high},
                 {"degenerate", s.degenerate}, {"relative_spread", s.relative_spread}});
  }
  return a;
}

// ---- plans, decompositions, fields, tours

inline json plan_to_json(const TransportPlan& plan) {
  json entries = json::array();
  const auto label = [](int idx, const char* sentinel) { return idx == kBoundary ? json(sentinel) : json(idx); };
  for (const PlanEntry& e : plan.entries) {
    entries.push_back({{"source", label(e.source, "B")},
                       {"target", label(e.target, "B′")},
                       {"mass", e.mass},
                       {"leg_cost", e.leg_cost}});
  }
  return {{"p", plan.p}, {"boundary", plan.boundary_variant}, {"cost", plan.total_cost}, {"entries", entries}};
}

inline json decomposition_to_json(const Decomposition& d) {
  json cells = json::array();
  for (const WhitneyCell& c : d.cells) {
    cells.push_back({{"kind", to_string(c.kind)}, {"origin", {c.origin.x, c.origin.y}}, {"side", c.side}, {"area", c.area}});
  }
  json net = json::array();
  for (Point p : d.net) net.push_back({p.x, p.y});
  return {{"delta", d.delta},
          {"r", d.refine_ratio},
          {"max_diameter", d.max_diameter},
          {"min_area", d.min_area},
          {"max_area", d.max_area},
          {"net", net},
          {"cells", cells}};
}

inline json field_to_json(const CosineField& f) {
  return {{"N", f.resolution()}, {"coefficients", f.coeffs()}};
}

inline CosineField field_from_json(const json& j) {
  try {
    const int n = j.at("N").get<int>();
    const auto a = j.at("coefficients").get<std::vector<double>>();
    if (a.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
      throw ArgumentError("field needs N*N coefficients");
    }
    CosineField f(n);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) f.at(r, c) = a[static_cast<std::size_t>(r * n + c)];
    }
    return f;
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("field: ") + e.what());
  }
}

inline json tour_to_json(const TourSolution& t) {
  json order = json::array();
  for (std::size_t i = 0; i < t.sigma.size(); ++i) {
    order.push_back({{"x", t.sigma[i]}});
    order.push_back({{"y", t.tau[i]}});
  }
  json j = {{"method", to_string(t.method)}, {"cost", t.cost}, {"order", order}};
  if (t.method == TourMethod::kHeuristic) j["matching"] = t.matching;
  return j;
}

inline json points_to_json(std::span<const Point> pts) {
  json a = json::array();
  for (Point p : pts) a.push_back({p.x, p.y});
  return a;
}

inline std::vector<Point> points_from_json(const json& a) {
  std::vector<Point> out;
  try {
    for (const json& v : a) out.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("points: ") + e.what());
  }
  return out;
}

}  // namespace matchlab::io
