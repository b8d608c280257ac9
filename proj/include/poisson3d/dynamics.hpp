#pragma once

// Poisson dynamics dx/dt = J(x)·grad H(x) with fixed-step explicit
// integrators, invariant monitoring, and the reduced one-degree-of-freedom
// flow in Darboux coordinates with recovery of the original time.

#include <poisson3d/casimir.hpp>
#include <poisson3d/darboux.hpp>
#include <poisson3d/error.hpp>
#include <poisson3d/expr.hpp>
#include <poisson3d/family.hpp>
#include <poisson3d/verification.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace poisson3d {

enum class Method { rk4, midpoint };

inline std::string_view to_string(Method m) { return m == Method::rk4 ? "rk4" : "midpoint"; }

class HamiltonianField {
 public:
  /// Gradient by symbolic differentiation.
  static HamiltonianField from_expression(Expr h) {
    if ((h.variables() & ~kSpatialVars) != 0) throw Error(ErrorKind::invalid_spec, "Hamiltonian may only use x1, x2, x3");
    HamiltonianField f;
    f.value_ = [h](const Point& x) { return eval(h, x); };
    std::array<ScalarFn3, 3> g;
    for (std::size_t a = 0; a < 3; ++a)
      g[a] = [d = differentiate(h, static_cast<Var>(a))](const Point& x) { return eval(d, x); };
    f.gradient_ = std::move(g);
    f.expr_ = std::move(h);
    return f;
  }

  /// Gradient from `gradient` when given, else central differences.
  static HamiltonianField from_callable(ScalarFn3 h, std::optional<std::array<ScalarFn3, 3>> gradient = std::nullopt) {
    HamiltonianField f;
    f.value_ = std::move(h);
    f.gradient_ = std::move(gradient);
    return f;
  }

  double value(const Point& x) const { return value_(x); }
  Vec3 gradient(const Point& x) const {
    Vec3 g{};
    for (std::size_t a = 0; a < 3; ++a) g[a] = gradient_ ? (*gradient_)[a](x) : central_difference(value_, x, a);
    return g;
  }
  const std::optional<Expr>& expression() const { return expr_; }

 private:
  ScalarFn3 value_;
  std::optional<std::array<ScalarFn3, 3>> gradient_;
  std::optional<Expr> expr_;
};

struct TrajectorySample {
  double t = 0.0;
  std::optional<double> tau;
  Point x{};
  double h = 0.0;
  std::optional<double> casimir;
  std::optional<Point> y;  // chart coordinates (reduced runs)
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  double step = 0.0;
  Method method = Method::rk4;
  std::string spec_name;
  std::optional<int> casimir_k;
  bool reduced = false;
};

/// Integration left the domain; carries the samples computed so far (the
/// last one is the last valid state).
class DomainExit : public Error {
 public:
  DomainExit(const std::string& what, Trajectory partial)
      : Error(ErrorKind::domain_exit, what), partial_(std::move(partial)) {}
  const Trajectory& partial() const { return partial_; }

 private:
  Trajectory partial_;
};

namespace detail {
inline Vec3 field_unchecked(const PoissonFamilySpec& spec, const HamiltonianField& h, const Point& x) {
  return multiply(spec.matrix_unchecked(x).full(), h.gradient(x));
}

template <std::size_t N>
using State = std::array<double, N>;

template <std::size_t N>
State<N> axpy(const State<N>& x, double a, const State<N>& v) {
  State<N> r{};
  for (std::size_t n = 0; n < N; ++n) r[n] = x[n] + a * v[n];
  return r;
}

template <std::size_t N, class Rhs>
State<N> step(const Rhs& f, const State<N>& x, double h, Method method) {
  if (method == Method::midpoint) {
    State<N> k1 = f(x);
    return axpy(x, h, f(axpy(x, 0.5 * h, k1)));
  }
  State<N> k1 = f(x);
  State<N> k2 = f(axpy(x, 0.5 * h, k1));
  State<N> k3 = f(axpy(x, 0.5 * h, k2));
  State<N> k4 = f(axpy(x, h, k3));
  State<N> r{};
  for (std::size_t n = 0; n < N; ++n) r[n] = x[n] + h / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]);
  return r;
}

/// Number of fixed steps covering `span` with step `h` (same sign); the last
/// step is shortened to land exactly on `span`.
inline std::size_t step_count(double span, double h) {
  double n = std::ceil(span / h - 1e-9);
  return static_cast<std::size_t>(std::max(0.0, n));
}

inline bool finite(const Point& x) { return std::isfinite(x[0]) && std::isfinite(x[1]) && std::isfinite(x[2]); }
}  // namespace detail

/// J(x)·grad H(x); x must lie in the domain.
inline Vec3 hamiltonian_vector_field(const PoissonFamilySpec& spec, const HamiltonianField& h, const Point& x) {
  require_in_domain(spec, x);
  return detail::field_unchecked(spec, h, x);
}

inline std::optional<double> casimir_if_defined(const PoissonFamilySpec& spec, int k, const Point& x) {
  if (!casimir_defined(spec, k, x)) return std::nullopt;
  return casimir_value(spec, k, x);
}

/// Fixed-step integration on [0, t_end]. Each sample records H and C_k
/// (k defaults to the best-conditioned index). Leaving the domain raises
/// DomainExit with the partial trajectory.
inline Trajectory integrate(const PoissonFamilySpec& spec, const HamiltonianField& h, const Point& x0, double t_end,
                            double dt, Method method = Method::rk4, std::optional<int> casimir_k = std::nullopt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorKind::precondition, "dt must be positive");
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw Error(ErrorKind::precondition, "t_end must be finite and >= 0");
  require_in_domain(spec, x0);
  int k = casimir_k ? *casimir_k : best_conditioned_k(spec);
  check_axis(k);

  Trajectory traj;
  traj.step = dt;
  traj.method = method;
  traj.spec_name = spec.name();
  traj.casimir_k = k;
  auto record = [&](double t, const Point& x) {
    traj.samples.push_back({t, std::nullopt, x, h.value(x), casimir_if_defined(spec, k, x), std::nullopt});
  };
  record(0.0, x0);

  auto rhs = [&](const Point& x) { return detail::field_unchecked(spec, h, x); };
  std::size_t n = detail::step_count(t_end, dt);
  Point x = x0;
  double t = 0.0;
  for (std::size_t s = 1; s <= n; ++s) {
    double t_next = std::min(t_end, static_cast<double>(s) * dt);
    Point next{};
    try {
      next = detail::step<3>(rhs, x, t_next - t, method);
    } catch (const Error& e) {
      throw DomainExit("step from t = " + std::to_string(t) + " failed: " + e.what(), traj);
    }
    if (!detail::finite(next)) throw Error(ErrorKind::domain, "non-finite state at t = " + std::to_string(t_next));
    if (!spec.domain().contains(next))
      throw DomainExit("trajectory left the domain after t = " + std::to_string(t) + " (last valid state " +
                           format_point(x) + ")",
                       traj);
    x = next;
    t = t_next;
    record(t, x);
  }
  return traj;
}

struct DriftReport {
  double max_abs_h = 0.0;
  double max_rel_h = 0.0;
  double max_abs_casimir = 0.0;
  double max_rel_casimir = 0.0;
  bool casimir_tracked = false;
};

inline DriftReport invariant_drift(const Trajectory& traj) {
  if (traj.samples.empty()) throw Error(ErrorKind::precondition, "trajectory is empty");
  DriftReport r;
  const auto& first = traj.samples.front();
  auto rel = [](double d, double ref) { return ref != 0.0 ? d / std::abs(ref) : d; };
  for (const auto& s : traj.samples) {
    double dh = std::abs(s.h - first.h);
    r.max_abs_h = std::max(r.max_abs_h, dh);
    r.max_rel_h = std::max(r.max_rel_h, rel(dh, first.h));
    if (first.casimir && s.casimir) {
      r.casimir_tracked = true;
      double dc = std::abs(*s.casimir - *first.casimir);
      r.max_abs_casimir = std::max(r.max_abs_casimir, dc);
      r.max_rel_casimir = std::max(r.max_rel_casimir, rel(dc, *first.casimir));
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Reduced flow in chart coordinates

/// grad_y of H~(y) = H(x(y)) via the chain rule through the inverse chart.
inline Vec3 reduced_gradient(const DarbouxChart& chart, const HamiltonianField& h, const Point& y) {
  const auto& s = chart.spec();
  auto [i, j, k] = chart.axes();
  auto at = [](const Point& p, int a) { return p[static_cast<std::size_t>(a - 1)]; };
  Point x = inverse_map(chart, y);
  Vec3 g = h.gradient(x);
  double phik = s.phi(k, x);
  double yk = at(y, k);
  double dxk_dyi = s.phi(i, y) * yk / phik;
  double dxk_dyj = s.phi(j, y) * (1.0 - yk) / phik;
  double dxk_dyk = chi(s, i, j, y) / phik;
  Vec3 gy{};
  gy[static_cast<std::size_t>(i - 1)] = at(g, i) + at(g, k) * dxk_dyi;
  gy[static_cast<std::size_t>(j - 1)] = at(g, j) + at(g, k) * dxk_dyj;
  gy[static_cast<std::size_t>(k - 1)] = at(g, k) * dxk_dyk;
  return gy;
}

/// Integrate dy/dtau = J_D·grad_y H~ from y0 over tau in [0, tau_end] with
/// fixed step dtau (same sign as tau_end). y_k stays fixed. The original
/// time is recovered by the trapezoid rule on dt = dtau / J_ij(x(y)); with a
/// negative factor t runs opposite to tau.
inline Trajectory integrate_reduced(const DarbouxChart& chart, const HamiltonianField& h, const Point& y0,
                                    double tau_end, double dtau, Method method = Method::rk4) {
  if (!(dtau != 0.0) || !std::isfinite(dtau) || !std::isfinite(tau_end) || (tau_end != 0.0 && (tau_end > 0.0) != (dtau > 0.0)))
    throw Error(ErrorKind::precondition, "dtau must be nonzero, finite and have the sign of tau_end");
  const auto& spec = chart.spec();
  auto [i, j, k] = chart.axes();
  const std::size_t ii = static_cast<std::size_t>(i - 1);
  const std::size_t jj = static_cast<std::size_t>(j - 1);
  const double yk = y0[static_cast<std::size_t>(k - 1)];

  Point x0 = inverse_map(chart, y0);
  require_in_domain(spec, x0);
  double f0 = reparam_factor(chart, y0);
  const int sign0 = f0 > 0.0 ? 1 : -1;

  Trajectory traj;
  traj.step = dtau;
  traj.method = method;
  traj.spec_name = spec.name();
  traj.casimir_k = k;
  traj.reduced = true;
  auto record = [&](double t, double tau, const Point& y, const Point& x) {
    traj.samples.push_back({t, tau, x, h.value(x), -yk, y});
  };
  record(0.0, 0.0, y0, x0);

  auto to_point = [&](const detail::State<2>& q) {
    Point y = y0;
    y[ii] = q[0];
    y[jj] = q[1];
    return y;
  };
  auto rhs = [&](const detail::State<2>& q) {
    Vec3 g = reduced_gradient(chart, h, to_point(q));
    return detail::State<2>{g[jj], -g[ii]};
  };

  std::size_t n = detail::step_count(tau_end, dtau);
  detail::State<2> q{y0[ii], y0[jj]};
  double tau = 0.0;
  double t = 0.0;
  double inv_factor = 1.0 / f0;
  for (std::size_t s = 1; s <= n; ++s) {
    double tau_next = static_cast<double>(s) * dtau;
    if (std::abs(tau_next) > std::abs(tau_end)) tau_next = tau_end;
    detail::State<2> next{};
    Point y{}, x{};
    double f = 0.0;
    try {
      next = detail::step<2>(rhs, q, tau_next - tau, method);
      y = to_point(next);
      x = inverse_map(chart, y);
      f = spec.matrix_unchecked(x)(i, j);
    } catch (const Error& e) {
      throw DomainExit("reduced step from tau = " + std::to_string(tau) + " failed: " + e.what(), traj);
    }
    if (!spec.domain().contains(x))
      throw DomainExit("reduced trajectory left the domain after tau = " + std::to_string(tau), traj);
    if (!(std::abs(f) > kFactorFloor) || (f > 0.0 ? 1 : -1) != sign0)
      throw Error(ErrorKind::reparam_breakdown, "reparametrization factor crosses zero near tau = " + std::to_string(tau_next));
    double inv_next = 1.0 / f;
    t += 0.5 * (tau_next - tau) * (inv_factor + inv_next);
    inv_factor = inv_next;
    q = next;
    tau = tau_next;
    record(t, tau, y, x);
  }
  return traj;
}

/// State at time t by cubic Hermite interpolation between the bracketing
/// samples, with dx/dt supplied by `rhs`. Samples are matched by t value,
/// so trajectories whose t decreases are handled too.
inline Point state_at_time(const Trajectory& traj, double t, const std::function<Vec3(const Point&)>& rhs) {
  const auto& s = traj.samples;
  for (std::size_t n = 0; n + 1 < s.size(); ++n) {
    double t0 = s[n].t, t1 = s[n + 1].t;
    if (t < std::min(t0, t1) || t > std::max(t0, t1)) continue;
    double h = t1 - t0;
    if (h == 0.0) return s[n].x;
    double u = (t - t0) / h;
    double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
    double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
    Vec3 d0 = rhs(s[n].x), d1 = rhs(s[n + 1].x);
    Point x{};
    for (std::size_t a = 0; a < 3; ++a)
      x[a] = h00 * s[n].x[a] + h10 * h * d0[a] + h01 * s[n + 1].x[a] + h11 * h * d1[a];
    return x;
  }
  throw Error(ErrorKind::out_of_range, "time " + std::to_string(t) + " is not covered by the trajectory");
}

// ---------------------------------------------------------------------------
// CSV: header t,tau,x1,x2,x3,H,C; 17 significant digits; empty cells for
// absent tau / C.

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
  out << "t,tau,x1,x2,x3,H,C\n";
  for (const auto& s : traj.samples) {
    out << format_g17(s.t) << ',' << (s.tau ? format_g17(*s.tau) : std::string()) << ',' << format_g17(s.x[0]) << ','
        << format_g17(s.x[1]) << ',' << format_g17(s.x[2]) << ',' << format_g17(s.h) << ','
        << (s.casimir ? format_g17(*s.casimir) : std::string()) << '\n';
  }
}

}  // namespace poisson3d
