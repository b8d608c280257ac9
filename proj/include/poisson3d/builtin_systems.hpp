#pragma once

// Ready-made family members: the Halphen structure, the circle-maps
// structure, and the cubic structure of the triaxial Euler top.

#include <poisson3d/domain.hpp>
#include <poisson3d/error.hpp>
#include <poisson3d/expr.hpp>
#include <poisson3d/family.hpp>
#include <poisson3d/scalar_fields.hpp>

#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace poisson3d {

/// (x1 - x2)(x2 - x3)(x3 - x1)
inline Expr difference_product() { return (x1() - x2()) * (x2() - x3()) * (x3() - x1()); }

inline DomainBox halphen_domain(std::array<Interval, 3> box) { return DomainBox(box, difference_product()); }

/// [0,1]^3 without the planes x_i = x_j.
inline DomainBox default_halphen_domain() { return DomainBox::cube(0.0, 1.0, difference_product()); }

namespace detail {
/// The domain predicate must cut out every plane x_i = x_j that meets the box.
inline void require_plane_exclusion(const DomainBox& domain, const char* system) {
  if (!domain.predicate())
    throw Error(ErrorKind::precondition, std::string(system) + " needs a domain predicate excluding x_i = x_j");
  for (int a = 1; a <= 3; ++a) {
    int b = a % 3 + 1;
    int c = b % 3 + 1;
    Interval ia = domain.axis(a), ib = domain.axis(b);
    double lo = std::max(ia.lo, ib.lo), hi = std::min(ia.hi, ib.hi);
    if (lo > hi) continue;
    for (double fa : {0.25, 0.5, 0.75})
      for (double fc : {0.3, 0.7}) {
        Point p{};
        p[static_cast<std::size_t>(a - 1)] = lo + (hi - lo) * fa;
        p[static_cast<std::size_t>(b - 1)] = p[static_cast<std::size_t>(a - 1)];
        p[static_cast<std::size_t>(c - 1)] = domain.axis(c).at(fc);
        if (domain.contains(p))
          throw Error(ErrorKind::precondition, std::string(system) + " domain predicate does not exclude x" +
                                                   std::to_string(a) + " = x" + std::to_string(b));
      }
  }
}

inline std::array<ScalarField1D, 3> identity_fields(const DomainBox& domain) {
  auto f = [&](int a) { return build_scalar_field(lit(1.0), u(), u(), domain.axis(a)); };
  return {f(1), f(2), f(3)};
}
}  // namespace detail

/// psi_i = x_i, phi_i = 1, kappa = 0, eta = (2(x1-x2)(x2-x3)(x3-x1))^-1.
inline PoissonFamilySpec halphen_structure(const DomainBox& domain = default_halphen_domain()) {
  detail::require_plane_exclusion(domain, "halphen");
  return PoissonFamilySpec::create("halphen", 1.0 / (2.0 * difference_product()), detail::identity_fields(domain),
                                   make_kappa(0.0, 0.0), domain);
}

/// Halphen data with eta = -((x1-x2)(x2-x3)(x3-x1))^-1.
inline PoissonFamilySpec circle_maps_structure(const DomainBox& domain = default_halphen_domain()) {
  detail::require_plane_exclusion(domain, "circle-maps");
  return PoissonFamilySpec::create("circle-maps", -(1.0 / difference_product()), detail::identity_fields(domain),
                                   make_kappa(0.0, 0.0), domain);
}

/// Principal moments of inertia and the derived constants
/// alpha1 = (I2-I3)/(I2 I3), alpha2 = (I3-I1)/(I1 I3), alpha3 = (I1-I2)/(I1 I2).
struct EulerTopParams {
  std::array<double, 3> inertia{1.0, 2.0, 3.0};
  std::array<double, 3> alpha{};

  static EulerTopParams from_inertia(double i1, double i2, double i3) {
    if (!(i1 > 0.0 && i2 > 0.0 && i3 > 0.0) || !std::isfinite(i1) || !std::isfinite(i2) || !std::isfinite(i3))
      throw Error(ErrorKind::precondition, "moments of inertia must be positive and finite");
    EulerTopParams p;
    p.inertia = {i1, i2, i3};
    p.alpha = {(i2 - i3) / (i2 * i3), (i3 - i1) / (i1 * i3), (i1 - i2) / (i1 * i2)};
    if (p.alpha[0] * p.alpha[1] * p.alpha[2] == 0.0)
      throw Error(ErrorKind::degenerate_parameters, "symmetric top: the moments of inertia must be pairwise distinct");
    return p;
  }
};

inline DomainBox default_euler_top_domain() { return DomainBox::cube(0.5, 2.0); }

/// Family form of the top: eta = (2 a1 a2 a3)^-1, psi_1 = a2 a3 x1^2,
/// psi_2 = a1 a3 x2^2, psi_3 = a1 a2 x3^2, phi_i = psi_i', kappa = 0. The
/// domain must lie in one open octant; zeta_i takes that octant's sign.
inline PoissonFamilySpec euler_top_structure(const EulerTopParams& params,
                                             const DomainBox& domain = default_euler_top_domain()) {
  auto octant = domain.octant();
  if (!octant) throw Error(ErrorKind::precondition, "euler-top domain must lie inside one open octant (x1 x2 x3 != 0)");
  const auto& a = params.alpha;
  std::array<double, 3> c{a[1] * a[2], a[0] * a[2], a[0] * a[1]};
  auto field = [&](int axis) {
    std::size_t n = static_cast<std::size_t>(axis - 1);
    double sigma = static_cast<double>((*octant)[n]);
    return build_scalar_field(lit(2.0 * c[n]) * u(), lit(c[n]) * pow(u(), 2.0), sigma * apply(Func::sqrt, u() / c[n]),
                              domain.axis(axis));
  };
  return PoissonFamilySpec::create("euler-top", lit(1.0 / (2.0 * a[0] * a[1] * a[2])), {field(1), field(2), field(3)},
                                   make_kappa(0.0, 0.0), domain);
}

/// J12 = (a2 x1^2 - a1 x2^2) x3, J23 = (a3 x2^2 - a2 x3^2) x1,
/// J31 = (a1 x3^2 - a3 x1^2) x2.
inline StructureMatrixValue euler_top_raw_matrix(const EulerTopParams& params, const Point& x) {
  const auto& a = params.alpha;
  return {(a[1] * x[0] * x[0] - a[0] * x[1] * x[1]) * x[2], (a[2] * x[1] * x[1] - a[1] * x[2] * x[2]) * x[0],
          (a[0] * x[2] * x[2] - a[2] * x[0] * x[0]) * x[1]};
}

/// Benchmark Hamiltonians used by the CLI (not part of the structures).
inline Expr linear_sum_hamiltonian() { return x1() + x2() + x3(); }
inline Expr rigid_body_hamiltonian(const EulerTopParams& p) {
  return 0.5 * (pow(x1(), 2.0) / p.inertia[0] + pow(x2(), 2.0) / p.inertia[1] + pow(x3(), 2.0) / p.inertia[2]);
}

inline std::vector<std::string> builtin_system_names() { return {"halphen", "circle-maps", "euler-top"}; }

}  // namespace poisson3d
