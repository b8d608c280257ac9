#pragma once

// Global Darboux chart for a family member with chi_ij != 0 on the domain:
//   y_i = x_i, y_j = x_j, y_k = -C_k(x),
// inverse x_k = zeta_k(psi_j(y_j) + kappa_jk + chi_ij(y_i, y_j)·y_k).
// In the new coordinates the matrix is J_ij(x(y))·J_D, and after the time
// change dtau = J_ij(x(y)) dt it is the constant canonical matrix J_D.

#include <poisson3d/casimir.hpp>
#include <poisson3d/domain.hpp>
#include <poisson3d/error.hpp>
#include <poisson3d/family.hpp>
#include <poisson3d/scalar_fields.hpp>
#include <poisson3d/verification.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace poisson3d {

inline constexpr std::size_t kChartSelectionSamples = 512;
inline constexpr std::size_t kChartGridPoints = 17;
inline constexpr double kFactorFloor = 1e-12;

enum class JacobianMode { analytic, finite_difference };

class DarbouxChart {
 public:
  const PoissonFamilySpec& spec() const { return spec_; }
  int k() const { return axes_.k; }
  int i() const { return axes_.i; }
  int j() const { return axes_.j; }
  CyclicTriple axes() const { return axes_; }
  /// Per-axis signs when the domain lies in one open octant.
  const std::optional<std::array<int, 3>>& sign_branch() const { return sign_branch_; }

  friend DarbouxChart build_chart(const PoissonFamilySpec& spec, std::optional<int> k);

 private:
  DarbouxChart(PoissonFamilySpec spec, CyclicTriple axes, std::optional<std::array<int, 3>> signs)
      : spec_(std::move(spec)), axes_(axes), sign_branch_(signs) {}

  PoissonFamilySpec spec_;
  CyclicTriple axes_;
  std::optional<std::array<int, 3>> sign_branch_;
};

/// The k whose chi_ij has the largest minimum |value| over 512 domain samples.
inline int best_conditioned_k(const PoissonFamilySpec& spec) {
  std::vector<Point> points = sample_domain(spec.domain(), kChartSelectionSamples, kSpecValidationSeed);
  int best = 3;
  double best_min = -1.0;
  for (int k : {3, 1, 2}) {
    auto [i, j, kk] = cyclic_ending_in(k);
    double m = std::numeric_limits<double>::infinity();
    for (const Point& x : points) m = std::min(m, std::abs(chi(spec, i, j, x)));
    if (m > best_min) {
      best_min = m;
      best = k;
    }
  }
  return best;
}

namespace detail {
/// Hypothesis check for chi_ij on the domain: random samples plus a grid over
/// the box whose sign changes are bisected to a zero; the zero only counts
/// when it lies in the domain (a predicate may cut the zero set out).
inline void check_chart_hypothesis(const PoissonFamilySpec& spec, int i, int j) {
  auto violation = [&](const Point& x) {
    return Error(ErrorKind::hypothesis_violation, "chi" + std::to_string(i) + std::to_string(j) + " vanishes at " +
                                                      format_point(x) + "; no global chart with this k");
  };
  auto small = [&](const Point& x) {
    return std::abs(chi(spec, i, j, x)) <= casimir_denominator_threshold(spec, i, j, x);
  };
  for (const Point& x : sample_domain(spec.domain(), kChartSelectionSamples, kSpecValidationSeed))
    if (small(x)) throw violation(x);

  const auto& box = spec.domain().box();
  const std::size_t n = kChartGridPoints;
  auto grid_point = [&](std::size_t a, std::size_t b, std::size_t c) {
    auto f = [n](std::size_t m) { return static_cast<double>(m) / static_cast<double>(n - 1); };
    return Point{box[0].at(f(a)), box[1].at(f(b)), box[2].at(f(c))};
  };
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c) {
        Point p = grid_point(a, b, c);
        if (!spec.domain().contains(p)) continue;
        if (small(p)) throw violation(p);
        double cp = chi(spec, i, j, p);
        std::array<std::size_t, 3> idx{a, b, c};
        for (int axis : {i, j}) {
          std::size_t ax = static_cast<std::size_t>(axis - 1);
          if (idx[ax] + 1 >= n) continue;
          std::array<std::size_t, 3> nb = idx;
          ++nb[ax];
          Point q = grid_point(nb[0], nb[1], nb[2]);
          if (!spec.domain().contains(q)) continue;
          double cq = chi(spec, i, j, q);
          if ((cp > 0.0) == (cq > 0.0)) continue;
          Point lo = p, hi = q;
          double clo = cp;
          for (int it = 0; it < 200 && hi[ax] - lo[ax] > 0.0; ++it) {
            Point mid = lo;
            mid[ax] = 0.5 * (lo[ax] + hi[ax]);
            if (mid[ax] == lo[ax] || mid[ax] == hi[ax]) break;
            double cm = chi(spec, i, j, mid);
            if ((cm > 0.0) == (clo > 0.0)) {
              lo = mid;
              clo = cm;
            } else {
              hi = mid;
            }
          }
          if (spec.domain().contains(lo)) throw violation(lo);
        }
      }
}
}  // namespace detail

/// Build the chart for Casimir index k (default: best conditioned). Throws
/// hypothesis_violation when chi_ij vanishes somewhere in the sampled domain.
inline DarbouxChart build_chart(const PoissonFamilySpec& spec, std::optional<int> k = std::nullopt) {
  int kk = k ? *k : best_conditioned_k(spec);
  CyclicTriple axes = cyclic_ending_in(kk);
  detail::check_chart_hypothesis(spec, axes.i, axes.j);
  return DarbouxChart(spec, axes, spec.domain().octant());
}

inline Point forward_map(const DarbouxChart& chart, const Point& x) {
  Point y = x;
  y[static_cast<std::size_t>(chart.k() - 1)] = -casimir_value(chart.spec(), chart.k(), x);
  return y;
}

/// Argument of zeta_k in the inverse: psi_j(y_j) + kappa_jk + chi_ij(y)·y_k.
inline double inverse_argument(const DarbouxChart& chart, const Point& y) {
  const auto& s = chart.spec();
  auto [i, j, k] = chart.axes();
  return s.psi(j, y) + s.kappa()(j, k) + chi(s, i, j, y) * y[static_cast<std::size_t>(k - 1)];
}

inline Point inverse_map(const DarbouxChart& chart, const Point& y) {
  const std::size_t kk = static_cast<std::size_t>(chart.k() - 1);
  Point x = y;
  x[kk] = psi_inverse(chart.spec().field(chart.k()), inverse_argument(chart, y));
  if (chart.sign_branch()) {
    int sigma = (*chart.sign_branch())[kk];
    if ((x[kk] > 0.0 ? 1 : -1) != sigma)
      throw Error(ErrorKind::branch_mismatch, "inverse lands on the wrong sign branch for axis " +
                                                  std::to_string(chart.k()) + " at y = " + format_point(y));
  }
  return x;
}

/// dy/dx at x: identity rows for i and j, -grad C_k for row k.
inline Matrix3 chart_jacobian(const DarbouxChart& chart, const Point& x, JacobianMode mode) {
  Matrix3 d{};
  for (std::size_t a = 0; a < 3; ++a) d[a][a] = 1.0;
  const std::size_t kk = static_cast<std::size_t>(chart.k() - 1);
  if (mode == JacobianMode::analytic) {
    Vec3 g = casimir_gradient(chart.spec(), chart.k(), x);
    for (std::size_t a = 0; a < 3; ++a) d[kk][a] = -g[a];
  } else {
    ScalarFn3 yk = [&chart, kk](const Point& p) { return forward_map(chart, p)[kk]; };
    for (std::size_t a = 0; a < 3; ++a) d[kk][a] = central_difference(yk, x, a);
  }
  return d;
}

/// J'(y) = (dy/dx)·J(x(y))·(dy/dx)^T as entries in y-coordinates.
inline StructureMatrixValue pushforward_matrix(const DarbouxChart& chart, const Point& y,
                                               JacobianMode mode = JacobianMode::analytic) {
  Point x = inverse_map(chart, y);
  Matrix3 d = chart_jacobian(chart, x, mode);
  Matrix3 j = chart.spec().matrix_unchecked(x).full();
  Matrix3 dj{};
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) dj[a][b] = d[a][0] * j[0][b] + d[a][1] * j[1][b] + d[a][2] * j[2][b];
  Matrix3 out{};
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) out[a][b] = dj[a][0] * d[b][0] + dj[a][1] * d[b][1] + dj[a][2] * d[b][2];
  return StructureMatrixValue::from_upper(out);
}

/// Closed form J_ij(x(y)) = eta(x(y))·chi_ij(y_i, y_j)·phi_k(x_k(y)).
inline double reparam_factor(const DarbouxChart& chart, const Point& y) {
  Point x = inverse_map(chart, y);
  double f = chart.spec().matrix_unchecked(x)(chart.i(), chart.j());
  if (!(std::abs(f) > kFactorFloor))
    throw Error(ErrorKind::hypothesis_violation, "reparametrization factor vanishes at y = " + format_point(y));
  return f;
}

/// The canonical matrix J_D in chart coordinates: 1 at (i, j), 0 elsewhere.
inline StructureMatrixValue canonical_matrix(const DarbouxChart& chart) {
  StructureMatrixValue m;
  switch (chart.k()) {
    case 3: m.j12 = 1.0; break;
    case 1: m.j23 = 1.0; break;
    case 2: m.j31 = 1.0; break;
  }
  return m;
}

struct CanonicalReport {
  std::size_t samples = 0;
  double max_deviation = 0.0;          // max |J'/factor - J_D| entrywise
  double max_decoupling = 0.0;         // max |J'_ik|, |J'_jk| relative to 1 + |factor|
  double max_factor_mismatch = 0.0;    // max |J'_ij - factor| / |factor|
  double max_roundtrip_error = 0.0;    // both compositions, relative to max(1, |.|)
  bool factor_sign_constant = true;
  Point worst_point{};
  double tol = 1e-8;
  double roundtrip_tol = 1e-10;
  bool pass = false;
};

/// Sample x in the domain, map to y, and compare the pushed-forward matrix
/// divided by the reparametrization factor with J_D.
inline CanonicalReport canonical_check(const DarbouxChart& chart, std::size_t n_samples, std::uint64_t seed,
                                       JacobianMode mode = JacobianMode::analytic) {
  CanonicalReport r;
  std::vector<Point> xs = sample_domain(chart.spec().domain(), n_samples, seed);
  r.samples = xs.size();
  StructureMatrixValue jd = canonical_matrix(chart);
  int first_sign = 0;
  auto rel = [](const Point& a, const Point& b) {
    double e = 0.0;
    for (std::size_t c = 0; c < 3; ++c) e = std::max(e, std::abs(a[c] - b[c]) / std::max(1.0, std::abs(b[c])));
    return e;
  };
  for (const Point& x : xs) {
    Point y = forward_map(chart, x);
    Point xb = inverse_map(chart, y);
    r.max_roundtrip_error = std::max(r.max_roundtrip_error, rel(xb, x));
    r.max_roundtrip_error = std::max(r.max_roundtrip_error, rel(forward_map(chart, xb), y));

    StructureMatrixValue jp = pushforward_matrix(chart, y, mode);
    double f = reparam_factor(chart, y);
    int s = f > 0.0 ? 1 : -1;
    if (first_sign == 0) first_sign = s;
    else if (s != first_sign) r.factor_sign_constant = false;

    double dev = std::max({std::abs(jp.j12 / f - jd.j12), std::abs(jp.j23 / f - jd.j23), std::abs(jp.j31 / f - jd.j31)});
    if (dev > r.max_deviation) {
      r.max_deviation = dev;
      r.worst_point = x;
    }
    r.max_factor_mismatch = std::max(r.max_factor_mismatch, std::abs(jp(chart.i(), chart.j()) - f) / std::abs(f));
    double dec = std::max(std::abs(jp(chart.i(), chart.k())), std::abs(jp(chart.j(), chart.k())));
    r.max_decoupling = std::max(r.max_decoupling, dec / (1.0 + std::abs(f)));
  }
  r.pass = r.max_deviation <= r.tol && r.max_roundtrip_error <= r.roundtrip_tol;
  return r;
}

}  // namespace poisson3d
