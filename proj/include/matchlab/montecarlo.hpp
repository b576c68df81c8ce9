#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "matchlab/density.hpp"
#include "matchlab/error.hpp"
#include "matchlab/geometry.hpp"
#include "matchlab/seed.hpp"
#include "matchlab/transport.hpp"
#include "matchlab/tsp.hpp"

namespace matchlab {

enum class Variant { kBipartite, kSemidiscrete, kBoundaryBipartite, kBoundarySemidiscrete, kInjective, kTsp };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::kBipartite: return "bipartite";
    case Variant::kSemidiscrete: return "semidiscrete";
    case Variant::kBoundaryBipartite: return "boundary-bipartite";
    case Variant::kBoundarySemidiscrete: return "boundary-semidiscrete";
    case Variant::kInjective: return "injective";
    case Variant::kTsp: return "tsp";
  }
  return "bipartite";
}

inline Variant variant_from_string(const std::string& s) {
  for (Variant v : {Variant::kBipartite, Variant::kSemidiscrete, Variant::kBoundaryBipartite,
                    Variant::kBoundarySemidiscrete, Variant::kInjective, Variant::kTsp}) {
    if (to_string(v) == s) return v;
  }
  throw ArgumentError("unknown variant '" + s + "'");
}

// Size of the second sample: m = n, m = ceil(q n), or m = n + floor(sqrt(log n)).
struct MRule {
  enum class Kind { kEqual, kRatio, kOffset };
  Kind kind = Kind::kEqual;
  double q = 1.0;

  std::size_t operator()(std::size_t n) const {
    switch (kind) {
      case Kind::kEqual: return n;
      case Kind::kRatio: return static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
      case Kind::kOffset: return n + static_cast<std::size_t>(std::floor(std::sqrt(std::log(static_cast<double>(n)))));
    }
    return n;
  }
};

struct DensityConfig {
  DensityFamily family = DensityFamily::kUniform;
  DensityParams params;
  double alpha = 1.0;
};

struct ExperimentConfig {
  int schema_version = 1;
  Variant variant = Variant::kBipartite;
  Polygon domain = Polygon::unit_square();
  DensityConfig density;
  std::vector<std::size_t> n_ladder;
  MRule m_rule;
  int trials = 1;
  std::uint64_t master_seed = 0;
  double grid_factor = 16.0;
  double p = 2.0;

  void validate() const {
    if (schema_version != 1) throw ArgumentError("unsupported schema_version " + std::to_string(schema_version));
    if (n_ladder.empty()) throw ArgumentError("n_ladder is empty");
    for (std::size_t i = 0; i < n_ladder.size(); ++i) {
      if (n_ladder[i] < 1) throw ArgumentError("n_ladder entries must be >= 1");
      if (i > 0 && n_ladder[i] <= n_ladder[i - 1]) throw ArgumentError("n_ladder must be strictly increasing");
    }
    if (trials < 1) throw ArgumentError("trials must be >= 1");
    if (m_rule.kind == MRule::Kind::kRatio && !(m_rule.q >= 1.0)) throw ArgumentError("ratio rule needs q >= 1");
    if (p < 1.0) throw ArgumentError("cost exponent p must be >= 1");
    if (variant == Variant::kTsp && (m_rule.kind != MRule::Kind::kEqual || p != 2.0)) {
      throw ArgumentError("tsp variant needs m = n and p = 2");
    }
  }

  DensitySpec density_spec() const { return DensitySpec(density.family, density.params, domain, density.alpha); }
};

struct TrialRecord {
  Variant variant = Variant::kBipartite;
  std::size_t n = 0;
  std::size_t m = 0;
  int trial = 0;
  std::uint64_t seed = 0;  // seed of the first point family
  double raw_cost = 0.0;
  double normalized_cost = 0.0;  // n raw_cost / log n
  double wall_ms = 0.0;
  // Variant-specific companions, all computed on the same points:
  //   boundary-*   reference = the corresponding W cost (Wb <= W)
  //   tsp          reference = 2 x matching cost / n (lower bound)
  //   injective    reference = min over S_n / n, and full = min over S_m / n
  std::optional<double> reference;
  std::optional<double> full;
};

inline double normalized(double raw, std::size_t n) {
  return n >= 2 ? static_cast<double>(n) * raw / std::log(static_cast<double>(n)) : 0.0;
}

// One trial: X from stream 1, Y (when used) from stream 2, both seeded from
// (master, n, trial) only.
inline TrialRecord run_trial(const ExperimentConfig& cfg, const DensitySpec& spec, std::size_t n, int trial) {
  const auto start = std::chrono::steady_clock::now();
  TrialRecord r;
  r.variant = cfg.variant;
  r.n = n;
  r.trial = trial;
  const std::uint64_t key = trial_key(n, static_cast<std::uint64_t>(trial));
  r.seed = derive_seed(cfg.master_seed, key, Stream::kFirstFamily);
  const std::uint64_t y_seed = derive_seed(cfg.master_seed, key, Stream::kSecondFamily);
  const double nd = static_cast<double>(n);
  switch (cfg.variant) {
    case Variant::kBipartite:
    case Variant::kBoundaryBipartite: {
      r.m = cfg.m_rule(n);
      const auto xs = sample_points(spec, n, r.seed).points;
      const auto ys = sample_points(spec, r.m, y_seed).points;
      const AtomicMeasure mu = AtomicMeasure::uniform(xs);
      const AtomicMeasure nu = AtomicMeasure::uniform(ys);
      const double w = transport_cost(mu, nu, cfg.p).total_cost;
      if (cfg.variant == Variant::kBipartite) {
        r.raw_cost = w;
      } else {
        r.raw_cost = boundary_transport_cost(mu, nu, cfg.domain, cfg.p).total_cost;
        r.reference = w;
      }
      break;
    }
    case Variant::kSemidiscrete:
    case Variant::kBoundarySemidiscrete: {
      const auto xs = sample_points(spec, n, r.seed).points;
      const SemidiscreteResult w = semidiscrete_cost(xs, spec, cfg.grid_factor, cfg.p);
      r.m = w.grid_atoms;
      if (cfg.variant == Variant::kSemidiscrete) {
        r.raw_cost = w.cost;
      } else {
        r.raw_cost = semidiscrete_cost(xs, spec, cfg.grid_factor, cfg.p, true).cost;
        r.reference = w.cost;
      }
      break;
    }
    case Variant::kInjective: {
      r.m = cfg.m_rule(n);
      // X_n is the prefix of X_m, Y_n the prefix of Y_m.
      const auto xm = sample_points(spec, r.m, r.seed).points;
      const auto ym = sample_points(spec, r.m, y_seed).points;
      const std::span<const Point> xn(xm.data(), n);
      const std::span<const Point> yn(ym.data(), n);
      r.raw_cost = flow_matching(xn, ym, cfg.p).cost / nd;
      r.reference = flow_matching(xn, yn, cfg.p).cost / nd;
      r.full = flow_matching(xm, ym, cfg.p).cost / nd;
      break;
    }
    case Variant::kTsp: {
      r.m = n;
      const auto xs = sample_points(spec, n, r.seed).points;
      const auto ys = sample_points(spec, n, y_seed).points;
      const TourSolution t = bipartite_tsp_heuristic(xs, ys);
      r.raw_cost = t.cost / nd;
      r.reference = 2.0 * t.matching / nd;
      break;
    }
  }
  r.normalized_cost = normalized(r.raw_cost, n);
  r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

// Runs every (n, trial) pair on up to `threads` workers (0 = hardware
// concurrency). Records come back ordered by (n, trial) whatever the
// schedule; a failing trial rethrows with its context.
inline std::vector<TrialRecord> run_experiment(const ExperimentConfig& cfg, unsigned threads = 0) {
  cfg.validate();
  const DensitySpec spec = cfg.density_spec();
  std::vector<std::pair<std::size_t, int>> tasks;
  for (std::size_t n : cfg.n_ladder) {
    for (int t = 0; t < cfg.trials; ++t) tasks.emplace_back(n, t);
  }
  std::vector<TrialRecord> out(tasks.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(tasks.size()));
  std::atomic<std::size_t> next{0};
  std::mutex failure_mutex;
  std::exception_ptr failure;
  std::string failure_context;
  const auto work = [&] {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= tasks.size()) return;
      try {
        out[k] = run_trial(cfg, spec, tasks[k].first, tasks[k].second);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) {
          failure = std::current_exception();
          failure_context = "n=" + std::to_string(tasks[k].first) + " trial=" + std::to_string(tasks[k].second);
        }
        next = tasks.size();
        return;
      }
    }
  };
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const SolverRefusal& e) {
      throw SolverRefusal(failure_context + ": " + e.what());
    } catch (const ArgumentError& e) {
      throw ArgumentError(failure_context + ": " + e.what());
    }
  }
  return out;
}

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

struct LadderPoint {
  std::size_t n = 0;
  std::size_t trials = 0;
  double mean = 0.0;      // mean of n raw_cost
  double variance = 0.0;  // sample variance of n raw_cost
};

inline std::vector<LadderPoint> ladder_means(const std::vector<TrialRecord>& records,
                                             std::optional<Variant> filter = std::nullopt) {
  std::map<std::size_t, std::vector<double>> by_n;
  for (const TrialRecord& r : records) {
    if (filter && r.variant != *filter) continue;
    by_n[r.n].push_back(static_cast<double>(r.n) * r.raw_cost);
  }
  std::vector<LadderPoint> out;
  for (const auto& [n, v] : by_n) {
    LadderPoint lp;
    lp.n = n;
    lp.trials = v.size();
    for (double x : v) lp.mean += x;
    lp.mean /= static_cast<double>(v.size());
    for (double x : v) lp.variance += (x - lp.mean) * (x - lp.mean);
    lp.variance = v.size() > 1 ? lp.variance / static_cast<double>(v.size() - 1) : 0.0;
    out.push_back(lp);
  }
  return out;
}

// Least squares of mean(n raw_cost) on log n; the standard error propagates
// the per-n variances of the means.
inline SlopeFit fit_slope(const std::vector<TrialRecord>& records, std::optional<Variant> filter = std::nullopt,
                          std::size_t min_trials = 30) {
  const std::vector<LadderPoint> pts = ladder_means(records, filter);
  if (pts.size() < 3) throw ArgumentError("slope fit needs at least 3 distinct n");
  for (const LadderPoint& lp : pts) {
    if (lp.trials < min_trials) {
      throw ArgumentError("slope fit needs at least " + std::to_string(min_trials) + " trials per n (n=" +
                          std::to_string(lp.n) + " has " + std::to_string(lp.trials) + ")");
    }
  }
  const double k = static_cast<double>(pts.size());
  double sx = 0.0, sy = 0.0;
  for (const LadderPoint& lp : pts) {
    sx += std::log(static_cast<double>(lp.n));
    sy += lp.mean;
  }
  const double mx = sx / k, my = sy / k;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const LadderPoint& lp : pts) {
    const double dx = std::log(static_cast<double>(lp.n)) - mx;
    sxx += dx * dx;
    sxy += dx * (lp.mean - my);
    syy += (lp.mean - my) * (lp.mean - my);
  }
  SlopeFit f;
  f.points = pts.size();
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double var = 0.0;
  for (const LadderPoint& lp : pts) {
    const double w = (std::log(static_cast<double>(lp.n)) - mx) / sxx;
    var += w * w * lp.variance / static_cast<double>(lp.trials);
  }
  f.stderr_slope = std::sqrt(var);
  f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

struct SummaryRow {
  Variant variant = Variant::kBipartite;
  std::size_t n = 0;
  std::size_t trials = 0;
  double mean = 0.0;  // of normalized cost
  double variance = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool degenerate = false;  // fewer than two trials: no interval
  // Relative spread sd / mean of the normalized cost, the concentration
  // diagnostic.
  double relative_spread = 0.0;
};

inline std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records) {
  if (records.empty()) throw ArgumentError("nothing to summarize");
  std::map<std::pair<int, std::size_t>, std::vector<double>> groups;
  for (const TrialRecord& r : records) groups[{static_cast<int>(r.variant), r.n}].push_back(r.normalized_cost);
  std::vector<SummaryRow> out;
  for (const auto& [key, v] : groups) {
    SummaryRow s;
    s.variant = static_cast<Variant>(key.first);
    s.n = key.second;
    s.trials = v.size();
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    for (double x : v) s.variance += (x - s.mean) * (x - s.mean);
    s.degenerate = v.size() < 2;
    s.variance = s.degenerate ? 0.0 : s.variance / static_cast<double>(v.size() - 1);
    const double half = s.degenerate ? 0.0 : 1.959963984540054 * std::sqrt(s.variance / static_cast<double>(v.size()));
    s.ci_low = s.mean - half;
    s.ci_high = s.mean + half;
    s.relative_spread = s.mean != 0.0 ? std::sqrt(s.variance) / std::abs(s.mean) : 0.0;
    out.push_back(s);
  }
  return out;
}

}  // namespace matchlab
