#pragma once

// Per-axis function triples: a density phi, its primitive psi and
// (optionally) the primitive's inverse zeta, validated on a closed interval.

#include <poisson3d/domain.hpp>
#include <poisson3d/error.hpp>
#include <poisson3d/expr.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>

namespace poisson3d {

inline constexpr std::size_t kFieldGridPoints = 256;
inline constexpr double kNonvanishingFloor = 1e-12;

struct NonvanishingReport {
  bool pass = true;
  std::optional<double> where;  // first offending sample
  std::string reason;
};

/// Grid check that f neither (nearly) vanishes nor changes sign between
/// adjacent samples. A statistical certificate only: roots between samples
/// that touch zero without a sign change are not detected.
inline NonvanishingReport assert_nonvanishing(const std::function<double(double)>& f, Interval interval,
                                              std::size_t samples) {
  if (samples < 2) throw Error(ErrorKind::precondition, "assert_nonvanishing needs at least 2 samples");
  double previous = 0.0;
  for (std::size_t n = 0; n < samples; ++n) {
    double u = interval.at(static_cast<double>(n) / static_cast<double>(samples - 1));
    double value = 0.0;
    try {
      value = f(u);
    } catch (const Error& e) {
      return {false, u, std::string("evaluation failed: ") + e.what()};
    }
    if (std::abs(value) <= kNonvanishingFloor) return {false, u, "function vanishes"};
    if (n > 0 && (value > 0.0) != (previous > 0.0)) return {false, u, "sign change"};
    previous = value;
  }
  return {};
}

inline NonvanishingReport assert_nonvanishing(const Expr& f, Interval interval, std::size_t samples) {
  return assert_nonvanishing([&f](double v) { return eval_u(f, v); }, interval, samples);
}

class ScalarField1D;
double psi_inverse(const ScalarField1D& field, double target);

class ScalarField1D {
 public:
  const Expr& phi_expr() const { return phi_; }
  const Expr& psi_expr() const { return psi_; }
  const std::optional<Expr>& zeta_expr() const { return zeta_; }
  const Interval& interval() const { return interval_; }

  double phi(double v) const { return eval_u(phi_, v); }
  double psi(double v) const { return eval_u(psi_, v); }

  /// psi(interval) as [min, max]; psi is strictly monotone on the interval.
  Interval psi_range() const {
    double a = psi(interval_.lo);
    double b = psi(interval_.hi);
    return a <= b ? Interval{a, b} : Interval{b, a};
  }
  bool increasing() const { return psi(interval_.hi) > psi(interval_.lo); }

  /// Same functions on a different interval (re-validated).
  ScalarField1D restricted(Interval interval) const;

  friend ScalarField1D build_scalar_field(Expr phi, Expr psi, std::optional<Expr> zeta, Interval interval);

 private:
  ScalarField1D(Expr phi, Expr psi, std::optional<Expr> zeta, Interval interval)
      : phi_(std::move(phi)), psi_(std::move(psi)), zeta_(std::move(zeta)), interval_(interval) {}

  Expr phi_;
  Expr psi_;
  std::optional<Expr> zeta_;
  Interval interval_;
};

/// Validate and assemble an axis triple. Checks on a 256-point grid:
/// phi nonvanishing, psi' = phi (central differences, rel. 1e-6), psi strictly
/// monotone, and zeta(psi(u)) = u to 1e-9 when zeta is given.
inline ScalarField1D build_scalar_field(Expr phi, Expr psi, std::optional<Expr> zeta, Interval interval) {
  auto only_u = [](const Expr& e, const char* slot) {
    if ((e.variables() & ~kAxisVars) != 0)
      throw Error(ErrorKind::invalid_spec, std::string(slot) + " must be an expression in u only");
  };
  only_u(phi, "phi");
  only_u(psi, "psi");
  if (zeta) only_u(*zeta, "zeta");
  if (!(std::isfinite(interval.lo) && std::isfinite(interval.hi) && interval.lo < interval.hi))
    throw Error(ErrorKind::precondition, "axis interval must be finite with lo < hi");

  auto report = assert_nonvanishing(phi, interval, kFieldGridPoints);
  if (!report.pass)
    throw Error(ErrorKind::vanishing, "phi fails the nonvanishing check at u = " + std::to_string(*report.where) +
                                          " (" + report.reason + ")");

  const double eps = std::numeric_limits<double>::epsilon();
  const double cbrt_eps = std::cbrt(eps);
  double previous_psi = 0.0;
  int direction = 0;
  for (std::size_t n = 0; n < kFieldGridPoints; ++n) {
    double v = interval.at(static_cast<double>(n) / static_cast<double>(kFieldGridPoints - 1));
    double h = cbrt_eps * std::max(1.0, std::abs(v));
    double plus = eval_u(psi, v + h);
    double minus = eval_u(psi, v - h);
    double fd = (plus - minus) / (2.0 * h);
    double density = eval_u(phi, v);
    double rounding = 4.0 * eps * (std::abs(plus) + std::abs(minus)) / (2.0 * h);
    if (std::abs(fd - density) > 1e-6 * std::max(1.0, std::abs(density)) + rounding)
      throw Error(ErrorKind::primitive_mismatch, "psi' != phi at u = " + std::to_string(v) + " (finite difference " +
                                                     std::to_string(fd) + ", phi " + std::to_string(density) + ")");
    double value = eval_u(psi, v);
    if (n > 0) {
      int d = value > previous_psi ? 1 : (value < previous_psi ? -1 : 0);
      if (d == 0 || (direction != 0 && d != direction))
        throw Error(ErrorKind::primitive_mismatch, "psi is not strictly monotone near u = " + std::to_string(v));
      direction = d;
    }
    previous_psi = value;
    if (zeta) {
      double back = eval_u(*zeta, value);
      if (std::abs(back - v) > 1e-9 * std::max(1.0, std::abs(v)))
        throw Error(ErrorKind::invalid_spec, "zeta(psi(u)) != u at u = " + std::to_string(v) + " (got " +
                                                 std::to_string(back) + ")");
    }
  }
  return ScalarField1D(std::move(phi), std::move(psi), std::move(zeta), interval);
}

inline ScalarField1D ScalarField1D::restricted(Interval interval) const {
  return build_scalar_field(phi_, psi_, zeta_, interval);
}

/// Solve psi(x) = target on the field's interval. Uses zeta when present,
/// otherwise a bisection-safeguarded secant iteration (at most 80 steps) on
/// the bracket given by strict monotonicity.
inline double psi_inverse(const ScalarField1D& field, double target) {
  const double tol = 1e-12 * std::max(1.0, std::abs(target));
  Interval range = field.psi_range();
  if (!std::isfinite(target) || target < range.lo - tol || target > range.hi + tol)
    throw Error(ErrorKind::out_of_range, "target " + std::to_string(target) + " outside psi range [" +
                                             std::to_string(range.lo) + ", " + std::to_string(range.hi) + "]");
  if (field.zeta_expr()) return eval_u(*field.zeta_expr(), target);

  double a = field.interval().lo;
  double b = field.interval().hi;
  double ga = field.psi(a) - target;
  double gb = field.psi(b) - target;
  if (std::abs(ga) <= tol) return a;
  if (std::abs(gb) <= tol) return b;
  // Clamp targets within tol of the range edges.
  if ((ga > 0.0) == (gb > 0.0)) return std::abs(ga) < std::abs(gb) ? a : b;

  double best = a;
  double best_g = ga;
  double last_width = b - a;
  for (int iter = 0; iter < 80; ++iter) {
    double x = b - gb * (b - a) / (gb - ga);
    double width = b - a;
    const double margin = 1e-3 * width;
    if (!(x > a + margin && x < b - margin) || width > 0.5 * last_width) x = 0.5 * (a + b);
    last_width = width;
    double gx = field.psi(x) - target;
    if (std::abs(gx) < std::abs(best_g)) {
      best = x;
      best_g = gx;
    }
    if (std::abs(gx) <= tol) return x;
    if ((gx > 0.0) == (ga > 0.0)) {
      a = x;
      ga = gx;
    } else {
      b = x;
      gb = gx;
    }
    if (b - a <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x))) break;
  }
  return best;
}

}  // namespace poisson3d
