#pragma once

// Numerical check of the 3-D Jacobi identity for arbitrary skew matrix
// fields. In three dimensions the identities reduce to the single equation
//   J12 d1J31 - J31 d1J12 + J23 d2J12 - J12 d2J23 + J31 d3J23 - J23 d3J31 = 0,
// and skew-symmetry holds by representation (only J12, J23, J31 are stored).

#include <poisson3d/domain.hpp>
#include <poisson3d/error.hpp>
#include <poisson3d/expr.hpp>
#include <poisson3d/family.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace poisson3d {

using ScalarFn3 = std::function<double(const Point&)>;

enum class DerivativeScheme { analytic, finite_difference };

inline std::string_view to_string(DerivativeScheme s) {
  return s == DerivativeScheme::analytic ? "analytic" : "finite-difference";
}

/// Entries (J12, J23, J31) with optional analytic partials
/// partials[entry][axis] = d_axis entry.
struct MatrixField3 {
  std::array<ScalarFn3, 3> entries;
  std::optional<std::array<std::array<ScalarFn3, 3>, 3>> partials;

  static MatrixField3 from_expressions(const std::array<Expr, 3>& e) {
    MatrixField3 f;
    std::array<std::array<ScalarFn3, 3>, 3> d;
    for (std::size_t a = 0; a < 3; ++a) {
      f.entries[a] = [ea = e[a]](const Point& x) { return eval(ea, x); };
      for (std::size_t l = 0; l < 3; ++l)
        d[a][l] = [da = differentiate(e[a], static_cast<Var>(l))](const Point& x) { return eval(da, x); };
    }
    f.partials = std::move(d);
    return f;
  }

  static MatrixField3 from_family(const PoissonFamilySpec& spec) {
    return from_expressions(family_entry_expressions(spec));
  }
};

/// Finite-difference step for axis value v: cbrt(eps)·max(1, |v|).
inline double fd_step(double v) {
  static const double cbrt_eps = std::cbrt(std::numeric_limits<double>::epsilon());
  return cbrt_eps * std::max(1.0, std::abs(v));
}

/// Central difference of f along `axis` (0-based) at x.
inline double central_difference(const ScalarFn3& f, const Point& x, std::size_t axis) {
  double h = fd_step(x[axis]);
  Point plus = x;
  Point minus = x;
  plus[axis] += h;
  minus[axis] -= h;
  // The realized step may differ from h by rounding.
  return (f(plus) - f(minus)) / (plus[axis] - minus[axis]);
}

struct JacobiEvaluation {
  double residual = 0.0;
  std::array<double, 6> terms{};
  double max_entry = 0.0;
  double max_partial = 0.0;

  /// 1 + max|J|·max|dJ|: bounds every term of the residual.
  double term_scale() const { return 1.0 + max_entry * max_partial; }
  double scaled_residual() const { return std::abs(residual) / term_scale(); }
};

inline JacobiEvaluation jacobi_evaluate(const MatrixField3& field, const Point& x, DerivativeScheme scheme) {
  std::array<double, 3> j{};
  for (std::size_t a = 0; a < 3; ++a) j[a] = field.entries[a](x);
  std::array<std::array<double, 3>, 3> d{};
  if (scheme == DerivativeScheme::analytic) {
    if (!field.partials) throw Error(ErrorKind::precondition, "analytic scheme requires the nine partial derivatives");
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t l = 0; l < 3; ++l) d[a][l] = (*field.partials)[a][l](x);
  } else {
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t l = 0; l < 3; ++l) d[a][l] = central_difference(field.entries[a], x, l);
  }
  // j = (J12, J23, J31); d[entry][axis]
  JacobiEvaluation out;
  out.terms = {j[0] * d[2][0], -j[2] * d[0][0], j[1] * d[0][1], -j[0] * d[1][1], j[2] * d[1][2], -j[1] * d[2][2]};
  out.residual = 0.0;
  for (double t : out.terms) out.residual += t;
  for (double v : j) out.max_entry = std::max(out.max_entry, std::abs(v));
  for (const auto& row : d)
    for (double v : row) out.max_partial = std::max(out.max_partial, std::abs(v));
  if (!std::isfinite(out.residual) || !std::isfinite(out.max_entry) || !std::isfinite(out.max_partial))
    throw Error(ErrorKind::domain, "non-finite Jacobi residual at " + format_point(x));
  return out;
}

inline double jacobi_residual(const MatrixField3& field, const Point& x, DerivativeScheme scheme) {
  return jacobi_evaluate(field, x, scheme).residual;
}

struct VerificationReport {
  std::size_t samples = 0;
  /// Largest scale-relative residual |R| / (1 + max|J|·max|dJ|); the verdict uses this.
  double max_abs_residual = 0.0;
  /// Largest raw |R| over the samples (diagnostic).
  double max_raw_residual = 0.0;
  Point worst_point{};
  bool pass = false;
  DerivativeScheme scheme = DerivativeScheme::analytic;
  std::uint64_t seed = 0;
  double tol = 0.0;
};

/// Sample the domain (seeded, order independent), evaluate the residual at
/// every accepted point and report the worst one. `workers` > 1 splits the
/// evaluation across threads; the report does not depend on the split.
inline VerificationReport verify_structure(const MatrixField3& field, const DomainBox& domain, std::size_t n_samples,
                                           double tol, std::uint64_t seed,
                                           DerivativeScheme scheme = DerivativeScheme::analytic,
                                           unsigned workers = 1) {
  if (n_samples == 0) throw Error(ErrorKind::precondition, "n_samples must be >= 1");
  std::vector<Point> points = sample_domain(domain, n_samples, seed);
  std::vector<JacobiEvaluation> results(points.size());

  auto run = [&](std::size_t begin, std::size_t end, std::exception_ptr& failure) {
    try {
      for (std::size_t n = begin; n < end; ++n) results[n] = jacobi_evaluate(field, points[n], scheme);
    } catch (...) {
      failure = std::current_exception();
    }
  };

  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(points.size())));
  std::vector<std::exception_ptr> failures(workers);
  if (workers == 1) {
    run(0, points.size(), failures[0]);
  } else {
    std::vector<std::thread> pool;
    std::size_t chunk = (points.size() + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      std::size_t begin = std::min(points.size(), w * chunk);
      std::size_t end = std::min(points.size(), begin + chunk);
      pool.emplace_back(run, begin, end, std::ref(failures[w]));
    }
    for (auto& t : pool) t.join();
  }
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);

  VerificationReport report;
  report.samples = points.size();
  report.scheme = scheme;
  report.seed = seed;
  report.tol = tol;
  report.worst_point = points.front();
  for (std::size_t n = 0; n < points.size(); ++n) {
    double scaled = results[n].scaled_residual();
    if (scaled > report.max_abs_residual) {
      report.max_abs_residual = scaled;
      report.worst_point = points[n];
    }
    report.max_raw_residual = std::max(report.max_raw_residual, std::abs(results[n].residual));
  }
  report.pass = report.max_abs_residual <= tol;
  return report;
}

/// Compares the Jacobi residual of the unit-prefactor matrix (eta = 1) built
/// from `fields` and `kappa` with the closed form -2·phi1·phi2·phi3·(k12 + k23 + k31).
/// kappa may violate the zero-sum condition; then both sides are nonzero.
class ReductionIdentity {
 public:
  ReductionIdentity(const std::array<ScalarField1D, 3>& fields, const KappaMatrix& kappa)
      : fields_(fields),
        kappa_(kappa),
        unit_field_(MatrixField3::from_expressions(family_entry_expressions(lit(1.0), fields, kappa))) {}

  /// {measured residual, closed-form value}
  std::pair<double, double> at(const Point& x) const {
    double residual = jacobi_residual(unit_field_, x, DerivativeScheme::analytic);
    double predicted = -2.0 * fields_[0].phi(x[0]) * fields_[1].phi(x[1]) * fields_[2].phi(x[2]) * kappa_.sum();
    return {residual, predicted};
  }

 private:
  std::array<ScalarField1D, 3> fields_;
  KappaMatrix kappa_;
  MatrixField3 unit_field_;
};

/// Convenience form for a spec whose prefactor is identically 1.
inline std::pair<double, double> reduction_identity_check(const PoissonFamilySpec& spec, const Point& x) {
  if (spec.eta_factors().size() != 1 || !spec.eta_factors().front().is_number(1.0))
    throw Error(ErrorKind::precondition, "reduction identity check requires eta = 1");
  require_in_domain(spec, x);
  return ReductionIdentity(spec.fields(), spec.kappa()).at(x);
}

}  // namespace poisson3d
