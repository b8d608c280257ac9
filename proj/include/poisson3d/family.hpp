#pragma once

// The three-function family of 3-D structure matrices
//   J_ij(x) = eta(x) * chi_ij(x_i, x_j) * phi_k(x_k),  (i, j, k) cyclic,
//   chi_ij  = psi_i(x_i) - psi_j(x_j) + kappa_ij,
// with constant skew kappa satisfying kappa_12 + kappa_23 + kappa_31 = 0.

#include <poisson3d/domain.hpp>
#include <poisson3d/error.hpp>
#include <poisson3d/expr.hpp>
#include <poisson3d/scalar_fields.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace poisson3d {

using Matrix3 = std::array<std::array<double, 3>, 3>;

/// (i, j, k) cyclic permutation of (1, 2, 3) ending in k.
struct CyclicTriple {
  int i, j, k;
};

inline CyclicTriple cyclic_ending_in(int k) {
  switch (k) {
    case 1: return {2, 3, 1};
    case 2: return {3, 1, 2};
    case 3: return {1, 2, 3};
    default: throw Error(ErrorKind::precondition, "axis index must be 1, 2 or 3 (got " + std::to_string(k) + ")");
  }
}

inline void check_axis(int i) {
  if (i < 1 || i > 3) throw Error(ErrorKind::precondition, "axis index must be 1, 2 or 3 (got " + std::to_string(i) + ")");
}

/// Skew constant matrix. kappa_31 is always derived from the other two, so
/// the zero-sum condition holds by construction; `unconstrained` exists only
/// for diagnostics that need a deliberately broken triple.
class KappaMatrix {
 public:
  KappaMatrix() = default;

  static KappaMatrix unconstrained(double k12, double k23, double k31) {
    KappaMatrix m;
    m.k_ = {k12, k23, k31};
    return m;
  }

  double k12() const { return k_[0]; }
  double k23() const { return k_[1]; }
  double k31() const { return k_[2]; }
  double sum() const { return k_[0] + k_[1] + k_[2]; }

  /// kappa_ij for any i, j in 1..3 (skew, zero diagonal).
  double operator()(int i, int j) const {
    check_axis(i);
    check_axis(j);
    if (i == j) return 0.0;
    if (i == 1 && j == 2) return k_[0];
    if (i == 2 && j == 3) return k_[1];
    if (i == 3 && j == 1) return k_[2];
    return -(*this)(j, i);
  }

  friend KappaMatrix make_kappa(double k12, double k23);

 private:
  std::array<double, 3> k_{0.0, 0.0, 0.0};
};

inline KappaMatrix make_kappa(double k12, double k23) {
  if (!std::isfinite(k12) || !std::isfinite(k23)) throw Error(ErrorKind::precondition, "kappa constants must be finite");
  KappaMatrix m;
  m.k_ = {k12, k23, -(k12 + k23)};
  return m;
}

/// Constants of the same structure after shifting each primitive
/// psi_i -> psi_i + shift_i: kappa~_ij = kappa_ij + shift_i - shift_j.
inline KappaMatrix absorb_primitive_shift(const KappaMatrix& kappa, const std::array<double, 3>& shift) {
  return make_kappa(kappa.k12() + shift[0] - shift[1], kappa.k23() + shift[1] - shift[2]);
}

/// The three independent entries of a skew 3x3 matrix at a point.
struct StructureMatrixValue {
  double j12 = 0.0;
  double j23 = 0.0;
  double j31 = 0.0;

  double operator()(int i, int j) const {
    check_axis(i);
    check_axis(j);
    if (i == j) return 0.0;
    if (i == 1 && j == 2) return j12;
    if (i == 2 && j == 3) return j23;
    if (i == 3 && j == 1) return j31;
    return -(*this)(j, i);
  }

  Matrix3 full() const {
    return {{{0.0, j12, -j31}, {-j12, 0.0, j23}, {j31, -j23, 0.0}}};
  }

  double max_abs() const { return std::max({std::abs(j12), std::abs(j23), std::abs(j31)}); }

  static StructureMatrixValue from_upper(const Matrix3& m) { return {m[0][1], m[1][2], m[2][0]}; }
};

inline Vec3 multiply(const Matrix3& m, const Vec3& v) {
  Vec3 r{};
  for (std::size_t a = 0; a < 3; ++a) r[a] = m[a][0] * v[0] + m[a][1] * v[1] + m[a][2] * v[2];
  return r;
}

inline double max_abs(const Vec3& v) { return std::max({std::abs(v[0]), std::abs(v[1]), std::abs(v[2])}); }

/// One member of the family. Immutable.
///
/// The prefactor is kept as an ordered list of factors: entries are computed
/// as f_n * (... * (f_1 * (eta_0 * chi * phi))), so rescaling by f multiplies
/// each previous entry value by f exactly once.
class PoissonFamilySpec {
 public:
  static PoissonFamilySpec create(std::string name, Expr eta, std::array<ScalarField1D, 3> fields,
                                  KappaMatrix kappa, DomainBox domain);

  const std::string& name() const { return name_; }
  const std::vector<Expr>& eta_factors() const { return eta_factors_; }
  const std::array<ScalarField1D, 3>& fields() const { return fields_; }
  const ScalarField1D& field(int i) const {
    check_axis(i);
    return fields_[static_cast<std::size_t>(i - 1)];
  }
  const KappaMatrix& kappa() const { return kappa_; }
  const DomainBox& domain() const { return domain_; }

  /// Product of all prefactors as a single expression.
  Expr eta_expr() const {
    Expr e = eta_factors_.front();
    for (std::size_t n = 1; n < eta_factors_.size(); ++n) e = eta_factors_[n] * e;
    return e;
  }
  double eta(const Point& x) const {
    double v = eval(eta_factors_.front(), x);
    for (std::size_t n = 1; n < eta_factors_.size(); ++n) v = eval(eta_factors_[n], x) * v;
    return v;
  }

  double psi(int i, const Point& x) const { return field(i).psi(x[static_cast<std::size_t>(i - 1)]); }
  double phi(int i, const Point& x) const { return field(i).phi(x[static_cast<std::size_t>(i - 1)]); }

  /// Matrix entries without the domain check (finiteness still enforced).
  StructureMatrixValue matrix_unchecked(const Point& x) const {
    std::array<double, 3> ps{psi(1, x), psi(2, x), psi(3, x)};
    std::array<double, 3> ph{phi(1, x), phi(2, x), phi(3, x)};
    double c12 = ps[0] - ps[1] + kappa_.k12();
    double c23 = ps[1] - ps[2] + kappa_.k23();
    double c31 = ps[2] - ps[0] + kappa_.k31();
    double eta0 = eval(eta_factors_.front(), x);
    std::array<double, 3> v{eta0 * c12 * ph[2], eta0 * c23 * ph[0], eta0 * c31 * ph[1]};
    for (std::size_t n = 1; n < eta_factors_.size(); ++n) {
      double f = eval(eta_factors_[n], x);
      for (double& e : v) e = f * e;
    }
    for (double e : v)
      if (!std::isfinite(e)) throw Error(ErrorKind::domain, "structure matrix is not finite at " + format_point(x));
    return {v[0], v[1], v[2]};
  }

  PoissonFamilySpec with_factor(Expr factor) const {
    PoissonFamilySpec copy = *this;
    copy.eta_factors_.push_back(std::move(factor));
    return copy;
  }

  PoissonFamilySpec with_domain(DomainBox domain) const;

 private:
  PoissonFamilySpec(std::string name, std::vector<Expr> eta, std::array<ScalarField1D, 3> fields, KappaMatrix kappa,
                    DomainBox domain)
      : name_(std::move(name)),
        eta_factors_(std::move(eta)),
        fields_(std::move(fields)),
        kappa_(kappa),
        domain_(std::move(domain)) {}

  static void validate(const PoissonFamilySpec& s);

  std::string name_;
  std::vector<Expr> eta_factors_;
  std::array<ScalarField1D, 3> fields_;
  KappaMatrix kappa_;
  DomainBox domain_;
};

inline constexpr std::size_t kSpecValidationSamples = 512;
inline constexpr std::uint64_t kSpecValidationSeed = 0x5eed;

inline void PoissonFamilySpec::validate(const PoissonFamilySpec& s) {
  for (int a = 1; a <= 3; ++a)
    if (!(s.field(a).interval() == s.domain().axis(a)))
      throw Error(ErrorKind::invalid_spec, "axis " + std::to_string(a) + " field interval does not match the domain box");
  for (const auto& f : s.eta_factors_)
    if ((f.variables() & ~kSpatialVars) != 0) throw Error(ErrorKind::invalid_spec, "eta may only use x1, x2, x3");
  for (const Point& x : sample_domain(s.domain(), kSpecValidationSamples, kSpecValidationSeed)) {
    double e = 0.0;
    try {
      e = s.eta(x);
    } catch (const Error& err) {
      throw Error(ErrorKind::vanishing, "eta cannot be evaluated at " + format_point(x) + ": " + err.what());
    }
    if (std::abs(e) <= kNonvanishingFloor) throw Error(ErrorKind::vanishing, "eta vanishes at " + format_point(x));
  }
}

inline PoissonFamilySpec PoissonFamilySpec::create(std::string name, Expr eta, std::array<ScalarField1D, 3> fields,
                                                   KappaMatrix kappa, DomainBox domain) {
  PoissonFamilySpec s(std::move(name), {std::move(eta)}, std::move(fields), kappa, std::move(domain));
  validate(s);
  return s;
}

inline PoissonFamilySpec PoissonFamilySpec::with_domain(DomainBox domain) const {
  std::array<ScalarField1D, 3> fields{fields_[0].restricted(domain.axis(1)), fields_[1].restricted(domain.axis(2)),
                                      fields_[2].restricted(domain.axis(3))};
  PoissonFamilySpec s(name_, eta_factors_, std::move(fields), kappa_, std::move(domain));
  validate(s);
  return s;
}

// ---------------------------------------------------------------------------

/// chi_ij(x) = psi_i(x_i) - psi_j(x_j) + kappa_ij; requires i != j.
inline double chi(const PoissonFamilySpec& spec, int i, int j, const Point& x) {
  check_axis(i);
  check_axis(j);
  if (i == j) throw Error(ErrorKind::precondition, "chi requires two distinct axes");
  return spec.psi(i, x) - spec.psi(j, x) + spec.kappa()(i, j);
}

inline void require_in_domain(const PoissonFamilySpec& spec, const Point& x) {
  if (!spec.domain().contains(x)) throw Error(ErrorKind::domain, "point " + format_point(x) + " is outside the domain");
}

inline StructureMatrixValue structure_matrix_at(const PoissonFamilySpec& spec, const Point& x) {
  require_in_domain(spec, x);
  return spec.matrix_unchecked(x);
}

inline constexpr double kRankTolerance = 1e-12;

/// Rank of a skew 3x3 matrix given by its entries: 0 or 2. Exactly two
/// entries at or below tol with the third above 1e3·tol cannot occur for a
/// family member (chi_12 + chi_23 + chi_31 = 0) and raises a consistency alarm.
inline int rank_of(const StructureMatrixValue& m, double tol) {
  std::array<double, 3> a{std::abs(m.j12), std::abs(m.j23), std::abs(m.j31)};
  int small = static_cast<int>(std::count_if(a.begin(), a.end(), [tol](double v) { return v <= tol; }));
  if (small == 3) return 0;
  if (small == 2 && *std::max_element(a.begin(), a.end()) > 1e3 * tol)
    throw Error(ErrorKind::consistency, "exactly two structure-matrix entries vanish; not a family member");
  return 2;
}

/// Rank at x with tolerance tol·(1 + |eta|·(|phi_1| + |phi_2| + |phi_3|)),
/// i.e. absolute near the origin and relative to the local entry scale.
inline int rank_at(const PoissonFamilySpec& spec, const Point& x, double tol = kRankTolerance) {
  StructureMatrixValue m = structure_matrix_at(spec, x);
  double scale = 1.0 + std::abs(spec.eta(x)) * (std::abs(spec.phi(1, x)) + std::abs(spec.phi(2, x)) +
                                                std::abs(spec.phi(3, x)));
  return rank_of(m, tol * scale);
}

/// New member with prefactor factor(x)·eta(x). The factor must not vanish at
/// the sampled domain points.
inline PoissonFamilySpec rescale(const PoissonFamilySpec& spec, const Expr& factor) {
  if ((factor.variables() & ~kSpatialVars) != 0)
    throw Error(ErrorKind::invalid_spec, "rescaling factor may only use x1, x2, x3");
  for (const Point& x : sample_domain(spec.domain(), kSpecValidationSamples, kSpecValidationSeed)) {
    double f = 0.0;
    try {
      f = eval(factor, x);
    } catch (const Error&) {
      throw Error(ErrorKind::vanishing, "rescaling factor cannot be evaluated at " + format_point(x));
    }
    if (std::abs(f) <= kNonvanishingFloor) throw Error(ErrorKind::vanishing, "rescaling factor vanishes at " + format_point(x));
  }
  return spec.with_factor(factor);
}

// ---------------------------------------------------------------------------
// Expression forms (variables x1, x2, x3), used for analytic derivatives.

inline Expr axis_expr(const Expr& e, int axis) { return substitute(e, Var::u, spatial(axis - 1)); }

/// Entries (J12, J23, J31) as expressions for arbitrary eta, fields and kappa
/// (kappa need not satisfy the zero-sum condition here).
inline std::array<Expr, 3> family_entry_expressions(const Expr& eta, const std::array<ScalarField1D, 3>& fields,
                                                    const KappaMatrix& kappa) {
  std::array<Expr, 3> psi{axis_expr(fields[0].psi_expr(), 1), axis_expr(fields[1].psi_expr(), 2),
                          axis_expr(fields[2].psi_expr(), 3)};
  std::array<Expr, 3> phi{axis_expr(fields[0].phi_expr(), 1), axis_expr(fields[1].phi_expr(), 2),
                          axis_expr(fields[2].phi_expr(), 3)};
  return {eta * ((psi[0] - psi[1] + kappa.k12()) * phi[2]), eta * ((psi[1] - psi[2] + kappa.k23()) * phi[0]),
          eta * ((psi[2] - psi[0] + kappa.k31()) * phi[1])};
}

inline std::array<Expr, 3> family_entry_expressions(const PoissonFamilySpec& spec) {
  return family_entry_expressions(spec.eta_expr(), spec.fields(), spec.kappa());
}

}  // namespace poisson3d
