#pragma once

// Casimir invariants C_k = chi_jk / chi_ij, (i, j, k) cyclic, of a family
// member, with their closed-form gradients.

#include <poisson3d/error.hpp>
#include <poisson3d/family.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace poisson3d {

/// |chi_ij| must exceed 1e-12·(1 + |psi_i| + |psi_j|) for C_k to be defined.
inline double casimir_denominator_threshold(const PoissonFamilySpec& spec, int i, int j, const Point& x) {
  return 1e-12 * (1.0 + std::abs(spec.psi(i, x)) + std::abs(spec.psi(j, x)));
}

inline bool casimir_defined(const PoissonFamilySpec& spec, int k, const Point& x) {
  auto [i, j, kk] = cyclic_ending_in(k);
  return std::abs(chi(spec, i, j, x)) > casimir_denominator_threshold(spec, i, j, x);
}

namespace detail {
inline double casimir_denominator(const PoissonFamilySpec& spec, int k, const Point& x) {
  auto [i, j, kk] = cyclic_ending_in(k);
  double den = chi(spec, i, j, x);
  if (!(std::abs(den) > casimir_denominator_threshold(spec, i, j, x)))
    throw Error(ErrorKind::undefined_at_point, "C" + std::to_string(k) + " is undefined at " + format_point(x) + ": chi" +
                                                   std::to_string(i) + std::to_string(j) + " vanishes");
  return den;
}
}  // namespace detail

inline double casimir_value(const PoissonFamilySpec& spec, int k, const Point& x) {
  double den = detail::casimir_denominator(spec, k, x);
  auto [i, j, kk] = cyclic_ending_in(k);
  return chi(spec, j, kk, x) / den;
}

/// Closed form d_m C_k = -chi_{m+1,m+2}·phi_m / chi_ij^2 (indices cyclic),
/// i.e. -(eta chi_ij^2)^-1 J_{m+1,m+2} with the prefactor cancelled.
inline Vec3 casimir_gradient(const PoissonFamilySpec& spec, int k, const Point& x) {
  double den = detail::casimir_denominator(spec, k, x);
  double den2 = den * den;
  Vec3 g{};
  for (int m = 1; m <= 3; ++m) {
    auto [a, b, c] = cyclic_ending_in(m);  // (a, b) = (m+1, m+2)
    g[static_cast<std::size_t>(m - 1)] = -chi(spec, a, b, x) * spec.phi(m, x) / den2;
  }
  return g;
}

struct AnnihilationResult {
  double residual = 0.0;  // ||J·grad C||_inf
  double scale = 1.0;     // 1 + ||J||_inf·||grad C||_inf
  bool within(double rel_tol) const { return residual <= rel_tol * scale; }
};

/// Max-norm of J(x)·grad C_k(x). The structure matrix is evaluated without
/// the domain-membership check; only C_k's own hypothesis is enforced.
inline AnnihilationResult annihilation_check(const PoissonFamilySpec& spec, int k, const Point& x) {
  Vec3 g = casimir_gradient(spec, k, x);
  Matrix3 j = spec.matrix_unchecked(x).full();
  Vec3 r = multiply(j, g);
  double norm_j = 0.0;
  for (const auto& row : j) norm_j = std::max(norm_j, std::abs(row[0]) + std::abs(row[1]) + std::abs(row[2]));
  return {max_abs(r), 1.0 + norm_j * max_abs(g)};
}

inline double annihilation_residual(const PoissonFamilySpec& spec, int k, const Point& x) {
  return annihilation_check(spec, k, x).residual;
}

}  // namespace poisson3d
