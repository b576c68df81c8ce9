#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "matchlab/density.hpp"
#include "matchlab/error.hpp"
#include "matchlab/geometry.hpp"
#include "matchlab/transport.hpp"

namespace matchlab {

// Field on the unit square in the orthonormal Neumann basis
// phi_jk(x, y) = c_j c_k cos(j pi x) cos(k pi y), c_0 = 1, c_j = sqrt(2).
class CosineField {
 public:
  CosineField() = default;
  explicit CosineField(int n) : n_(n), a_(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0) {
    if (n < 1) throw ArgumentError("resolution N must be >= 1");
  }

  static double basis_scale(int j) { return j == 0 ? 1.0 : std::numbers::sqrt2; }
  static double eigenvalue(int j, int k) { return std::numbers::pi * std::numbers::pi * (j * j + k * k); }

  // amplitude * cos(j pi x) cos(k pi y)
  static CosineField mode(int n, int j, int k, double amplitude) {
    if (j >= n || k >= n) throw ArgumentError("mode index beyond resolution");
    CosineField f(n);
    f.at(j, k) = amplitude / (basis_scale(j) * basis_scale(k));
    f.l2_squared_ = f.at(j, k) * f.at(j, k);
    return f;
  }

  // Indicator of [x0,x1] x [y0,y1] with exact coefficients.
  static CosineField indicator(int n, const Box& b) {
    CosineField f(n);
    const auto coeff = [](int j, double lo, double hi) {
      if (j == 0) return hi - lo;
      const double w = j * std::numbers::pi;
      return std::numbers::sqrt2 * (std::sin(w * hi) - std::sin(w * lo)) / w;
    };
    std::vector<double> cx(static_cast<std::size_t>(n)), cy(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      cx[static_cast<std::size_t>(j)] = coeff(j, b.lo.x, b.hi.x);
      cy[static_cast<std::size_t>(j)] = coeff(j, b.lo.y, b.hi.y);
    }
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) f.at(j, k) = cx[static_cast<std::size_t>(j)] * cy[static_cast<std::size_t>(k)];
    }
    f.l2_squared_ = b.area();
    return f;
  }

  // Projection of g by the midpoint rule on a q x q grid (q >= 2N).
  static CosineField project(int n, const std::function<double(Point)>& g, int q = 0) {
    if (q <= 0) q = 2 * n;
    CosineField f(n);
    std::vector<double> values(static_cast<std::size_t>(q * q));
    for (int b = 0; b < q; ++b) {
      for (int a = 0; a < q; ++a) values[static_cast<std::size_t>(b * q + a)] = g({(a + 0.5) / q, (b + 0.5) / q});
    }
    std::vector<double> table(static_cast<std::size_t>(n * q));
    for (int j = 0; j < n; ++j) {
      for (int a = 0; a < q; ++a) {
        table[static_cast<std::size_t>(j * q + a)] = basis_scale(j) * std::cos(j * std::numbers::pi * (a + 0.5) / q) / q;
      }
    }
    // Transform along x, then along y.
    std::vector<double> half(static_cast<std::size_t>(n * q), 0.0);
    for (int b = 0; b < q; ++b) {
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int a = 0; a < q; ++a) s += table[static_cast<std::size_t>(j * q + a)] * values[static_cast<std::size_t>(b * q + a)];
        half[static_cast<std::size_t>(b * n + j)] = s;
      }
    }
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int b = 0; b < q; ++b) s += table[static_cast<std::size_t>(k * q + b)] * half[static_cast<std::size_t>(b * n + j)];
        f.at(j, k) = s;
      }
    }
    return f;
  }

  int resolution() const { return n_; }
  double& at(int j, int k) { return a_[static_cast<std::size_t>(j * n_ + k)]; }
  double at(int j, int k) const { return a_[static_cast<std::size_t>(j * n_ + k)]; }
  const std::vector<double>& coeffs() const { return a_; }
  double mean() const { return a_.empty() ? 0.0 : a_.front(); }

  // Exact squared L2 norm of the represented function when known (closed-form
  // constructors), used to bound the truncated tail.
  std::optional<double> exact_l2_squared() const { return l2_squared_; }

  double l2_squared() const {
    double s = 0.0;
    for (double v : a_) s += v * v;
    return s;
  }

  double operator()(Point p) const {
    double s = 0.0;
    std::vector<double> cy(static_cast<std::size_t>(n_));
    for (int k = 0; k < n_; ++k) cy[static_cast<std::size_t>(k)] = basis_scale(k) * std::cos(k * std::numbers::pi * p.y);
    for (int j = 0; j < n_; ++j) {
      const double cx = basis_scale(j) * std::cos(j * std::numbers::pi * p.x);
      double row = 0.0;
      for (int k = 0; k < n_; ++k) row += at(j, k) * cy[static_cast<std::size_t>(k)];
      s += cx * row;
    }
    return s;
  }

  CosineField& operator*=(double c) {
    for (double& v : a_) v *= c;
    if (l2_squared_) *l2_squared_ *= c * c;
    return *this;
  }

  friend CosineField operator-(const CosineField& f, const CosineField& g) {
    if (f.n_ != g.n_) throw ArgumentError("fields differ in resolution");
    CosineField out(f.n_);
    for (std::size_t i = 0; i < out.a_.size(); ++i) out.a_[i] = f.a_[i] - g.a_[i];
    return out;
  }

  // Subtracts the mean, keeping a known L2 norm consistent.
  CosineField centered() const {
    CosineField out = *this;
    if (out.l2_squared_) *out.l2_squared_ -= mean() * mean();
    out.a_.front() = 0.0;
    return out;
  }

 private:
  int n_ = 0;
  std::vector<double> a_;
  std::optional<double> l2_squared_;
};

// P_t: a_jk -> a_jk exp(-lambda_jk t).
inline CosineField heat_evolve(const CosineField& f, double t) {
  if (!(t >= 0.0)) throw ArgumentError("time must be >= 0");
  CosineField out(f.resolution());
  for (int j = 0; j < f.resolution(); ++j) {
    for (int k = 0; k < f.resolution(); ++k) out.at(j, k) = f.at(j, k) * std::exp(-CosineField::eigenvalue(j, k) * t);
  }
  return out;
}

struct HMinus1Norm {
  double squared = 0.0;
  // Bound on the squared contribution of modes beyond the resolution; NaN
  // when the field's exact L2 norm is unknown.
  double remainder = 0.0;
  double norm() const { return std::sqrt(squared); }
};

// ||f||^2_{H^-1} = sum over (j,k) != 0 of a_jk^2 / (pi^2 (j^2 + k^2)).
inline HMinus1Norm hminus1_norm(const CosineField& f) {
  if (std::abs(f.mean()) > 1e-14 * std::max(1.0, std::sqrt(f.l2_squared()))) {
    throw ArgumentError("H^-1 norm needs a mean-zero field");
  }
  HMinus1Norm r;
  const int n = f.resolution();
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      if (j == 0 && k == 0) continue;
      r.squared += f.at(j, k) * f.at(j, k) / CosineField::eigenvalue(j, k);
    }
  }
  if (const auto l2 = f.exact_l2_squared()) {
    const double tail = std::max(0.0, *l2 - f.l2_squared());
    r.remainder = tail / CosineField::eigenvalue(n, 0);
  } else {
    r.remainder = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

// The same norm from its time-integral form: integral over (0, inf) of
// ||P_{t/2} f||^2 dt, by double-exponential quadrature.
inline double hminus1_by_time_integral(const CosineField& f) {
  const CosineField g = f.centered();
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate([&](double t) { return heat_evolve(g, 0.5 * t).l2_squared(); });
}

// ||f||_{H^-1} / (||f||_1 sqrt(|log(||f||_1 / ||f||_inf)| + 1)).
inline double sobolev_bound_ratio(const CosineField& f, double l1, double linf) {
  if (!(l1 > 0.0) || !(linf > 0.0)) throw ArgumentError("zero field");
  return hminus1_norm(f).norm() / (l1 * std::sqrt(std::abs(std::log(l1 / linf)) + 1.0));
}

// Sparse view of a field for fast pointwise evaluation of the heat flow.
class HeatFlowField {
 public:
  explicit HeatFlowField(const CosineField& rho, double cutoff = 1e-14) {
    for (int j = 0; j < rho.resolution(); ++j) {
      for (int k = 0; k < rho.resolution(); ++k) {
        const double a = rho.at(j, k);
        if (std::abs(a) > cutoff || (j == 0 && k == 0)) {
          modes_.push_back({j, k, a * CosineField::basis_scale(j) * CosineField::basis_scale(k), CosineField::eigenvalue(j, k)});
        }
      }
    }
  }

  // rho_t and its gradient at p.
  void evaluate(double t, Point p, double& value, Point& grad) const {
    value = 0.0;
    grad = {0.0, 0.0};
    for (const Mode& m : modes_) {
      const double w = m.scaled * std::exp(-m.lambda * t);
      if (w == 0.0) continue;
      const double ax = m.j * std::numbers::pi;
      const double ay = m.k * std::numbers::pi;
      const double cx = std::cos(ax * p.x), cy = std::cos(ay * p.y);
      value += w * cx * cy;
      grad.x -= w * ax * std::sin(ax * p.x) * cy;
      grad.y -= w * ay * cx * std::sin(ay * p.y);
    }
  }

  // b_t = -grad log rho_t
  Point velocity(double t, Point p) const {
    double v;
    Point g;
    evaluate(t, p, v, g);
    return (-1.0 / v) * g;
  }

  // sup over modes of |b_t| bound: sum |a| lambda^(1/2) e^(-lambda t) / min rho_t.
  double velocity_bound(double t, double min_value) const {
    double s = 0.0;
    for (const Mode& m : modes_) {
      if (m.j == 0 && m.k == 0) continue;
      s += std::abs(m.scaled) * std::sqrt(m.lambda) * std::exp(-m.lambda * t);
    }
    return s / min_value;
  }

 private:
  struct Mode {
    int j;
    int k;
    double scaled;
    double lambda;
  };
  std::vector<Mode> modes_;
};

struct FlowMapOptions {
  int grid = 129;
  int modes = 64;
  double t_min = 1e-6;
  double ratio = 1.2;
  double stop_velocity = 1e-10;
};

// Heat-flow transport map sampled on a G x G grid of nodes (i/(G-1), j/(G-1)).
struct FlowMap {
  int grid = 0;
  std::vector<Point> image;  // row-major, index j * grid + i
  double lip = 0.0;          // max |T(p) - T(q)| / |p - q| over neighbouring nodes
  double lip_inverse = 0.0;  // max |p - q| / |T(p) - T(q)|
  double holder_norm = 0.0;  // ||rho - 1||_{C^alpha} as estimated on the grid
  int steps = 0;

  Point node(int i, int j) const { return {static_cast<double>(i) / (grid - 1), static_cast<double>(j) / (grid - 1)}; }
  Point at(int i, int j) const { return image[static_cast<std::size_t>(j * grid + i)]; }

  // Bilinear interpolation of the sampled map.
  Point operator()(Point p) const {
    const double fx = std::clamp(p.x, 0.0, 1.0) * (grid - 1);
    const double fy = std::clamp(p.y, 0.0, 1.0) * (grid - 1);
    const int i = std::min(static_cast<int>(fx), grid - 2);
    const int j = std::min(static_cast<int>(fy), grid - 2);
    const double tx = fx - i, ty = fy - j;
    return (1 - tx) * (1 - ty) * at(i, j) + tx * (1 - ty) * at(i + 1, j) + (1 - tx) * ty * at(i, j + 1) +
           tx * ty * at(i + 1, j + 1);
  }
};

// Estimate of ||rho - 1||_{C^alpha} = sup |rho - 1| + Holder seminorm, over
// pairs of neighbouring points of a fine grid.
inline double holder_norm_estimate(const std::function<double(Point)>& rho, double alpha, int cells = 256) {
  const double h = 1.0 / cells;
  double sup = 0.0, semi = 0.0;
  std::vector<double> v(static_cast<std::size_t>((cells + 1) * (cells + 1)));
  for (int j = 0; j <= cells; ++j) {
    for (int i = 0; i <= cells; ++i) {
      v[static_cast<std::size_t>(j * (cells + 1) + i)] = rho({i * h, j * h});
      sup = std::max(sup, std::abs(v[static_cast<std::size_t>(j * (cells + 1) + i)] - 1.0));
    }
  }
  const auto val = [&](int i, int j) { return v[static_cast<std::size_t>(j * (cells + 1) + i)]; };
  for (int j = 0; j <= cells; ++j) {
    for (int i = 0; i <= cells; ++i) {
      if (i < cells) semi = std::max(semi, std::abs(val(i + 1, j) - val(i, j)) / std::pow(h, alpha));
      if (j < cells) semi = std::max(semi, std::abs(val(i, j + 1) - val(i, j)) / std::pow(h, alpha));
    }
  }
  return sup + semi;
}

// Integrates dx/dt = -grad log rho_t(x) with rho_t = P_t rho from every grid
// node, using classical RK4 on graded steps t_k = t_min ratio^k until the
// velocity bound drops below stop_velocity; iterates are clamped to the
// square.
inline FlowMap heat_flow_map(const DensitySpec& spec, const FlowMapOptions& opt = {}) {
  const Box box = spec.domain().bounding_box();
  if (std::abs(box.lo.x) > 1e-12 || std::abs(box.lo.y) > 1e-12 || std::abs(box.hi.x - 1.0) > 1e-12 ||
      std::abs(box.hi.y - 1.0) > 1e-12 || std::abs(spec.domain().area() - 1.0) > 1e-12) {
    throw ArgumentError("heat-flow map is defined on the unit square only");
  }
  if (opt.grid < 2) throw ArgumentError("grid must have at least 2 nodes per side");
  const auto rho = [&](Point p) { return spec(p); };
  FlowMap map;
  map.grid = opt.grid;
  map.holder_norm = holder_norm_estimate(rho, spec.holder_exponent());
  if (map.holder_norm > 0.5) {
    throw SolverRefusal("heat-flow map needs ||rho - 1||_{C^alpha} <= 1/2 (estimated " + std::to_string(map.holder_norm) + ")");
  }
  const CosineField field = CosineField::project(opt.modes, rho, 4 * opt.modes);
  const HeatFlowField flow(field);
  const double min_rho = 1.0 - map.holder_norm;

  std::vector<double> times{0.0, opt.t_min};
  while (flow.velocity_bound(times.back(), min_rho) >= opt.stop_velocity) times.push_back(times.back() * opt.ratio);
  map.steps = static_cast<int>(times.size()) - 1;

  const auto clamp01 = [](Point p) { return Point{std::clamp(p.x, 0.0, 1.0), std::clamp(p.y, 0.0, 1.0)}; };
  map.image.resize(static_cast<std::size_t>(opt.grid * opt.grid));
  for (int j = 0; j < opt.grid; ++j) {
    for (int i = 0; i < opt.grid; ++i) {
      Point x = map.node(i, j);
      for (std::size_t s = 0; s + 1 < times.size(); ++s) {
        const double t = times[s];
        const double dt = times[s + 1] - t;
        const Point k1 = flow.velocity(t, x);
        const Point k2 = flow.velocity(t + 0.5 * dt, clamp01(x + 0.5 * dt * k1));
        const Point k3 = flow.velocity(t + 0.5 * dt, clamp01(x + 0.5 * dt * k2));
        const Point k4 = flow.velocity(t + dt, clamp01(x + dt * k3));
        x = clamp01(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
      }
      map.image[static_cast<std::size_t>(j * opt.grid + i)] = x;
    }
  }

  const int di[4] = {1, 0, 1, 1};
  const int dj[4] = {0, 1, 1, -1};
  for (int j = 0; j < opt.grid; ++j) {
    for (int i = 0; i < opt.grid; ++i) {
      for (int d = 0; d < 4; ++d) {
        const int a = i + di[d], b = j + dj[d];
        if (a < 0 || b < 0 || a >= opt.grid || b >= opt.grid) continue;
        const double dp = distance(map.node(i, j), map.node(a, b));
        const double dt = distance(map.at(i, j), map.at(a, b));
        map.lip = std::max(map.lip, dt / dp);
        map.lip_inverse = std::max(map.lip_inverse, dp / dt);
      }
    }
  }
  return map;
}

// Uniform grid measure of a positive density field on the unit square.
inline AtomicMeasure field_grid_measure(const std::function<double(Point)>& rho, int cells) {
  std::vector<Atom> atoms;
  const double h = 1.0 / cells;
  double total = 0.0;
  for (int j = 0; j < cells; ++j) {
    for (int i = 0; i < cells; ++i) {
      const Point c{(i + 0.5) * h, (j + 0.5) * h};
      const double v = rho(c);
      if (!(v > 0.0)) throw ArgumentError("density must be positive");
      atoms.push_back({c, v * h * h});
      total += v * h * h;
    }
  }
  for (Atom& a : atoms) a.mass /= total;
  return AtomicMeasure(std::move(atoms));
}

struct PeyreRatio {
  double ratio = 0.0;
  double w2 = 0.0;
  double bound = 0.0;  // 2 (inf lambda)^(-1/2) ||mu - lambda||_{H^-1}
};

// W_2(mu, lambda) against 2 (inf lambda)^(-1/2) ||mu - lambda||_{H^-1}, with
// W_2 from transport between cells x cells grid discretizations.
inline PeyreRatio peyre_ratio(const CosineField& mu, const CosineField& lambda, int cells = 64) {
  if (std::abs(mu.mean() - lambda.mean()) > 1e-12 * std::max(1.0, std::abs(mu.mean()))) {
    throw ArgumentError("densities must have equal mass");
  }
  double inf_lambda = std::numeric_limits<double>::infinity();
  const auto eval = [](const CosineField& f) { return [&f](Point p) { return f(p); }; };
  const AtomicMeasure a = field_grid_measure(eval(mu), cells);
  const AtomicMeasure b = field_grid_measure(eval(lambda), cells);
  for (int j = 0; j <= cells; ++j) {
    for (int i = 0; i <= cells; ++i) inf_lambda = std::min(inf_lambda, lambda({static_cast<double>(i) / cells, static_cast<double>(j) / cells}));
  }
  if (!(inf_lambda > 0.0)) throw ArgumentError("density must be positive");
  PeyreRatio r;
  r.w2 = std::sqrt(transport_cost(a, b, 2.0).total_cost);
  r.bound = 2.0 / std::sqrt(inf_lambda) * hminus1_norm(mu - lambda).norm();
  r.ratio = r.bound > 0.0 ? r.w2 / r.bound : 0.0;
  return r;
}

}  // namespace matchlab
