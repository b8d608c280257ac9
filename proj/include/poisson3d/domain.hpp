#pragma once

#include <poisson3d/error.hpp>
#include <poisson3d/expr.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace poisson3d {

/// Closed interval [lo, hi] with lo <= hi.
struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  double width() const { return hi - lo; }
  double at(double fraction) const { return lo + (hi - lo) * fraction; }
  /// Open-orthant test: true when the interval excludes zero.
  bool excludes_zero() const { return lo > 0.0 || hi < 0.0; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

inline constexpr double kPredicateFloor = 1e-12;

/// Three closed intervals plus an optional predicate expression in x1..x3
/// that must stay nonzero (|p| > 1e-12) for a point to belong to the domain.
class DomainBox {
 public:
  DomainBox() = default;
  explicit DomainBox(std::array<Interval, 3> box, std::optional<Expr> predicate = std::nullopt)
      : box_(box), predicate_(std::move(predicate)) {
    for (const auto& iv : box_)
      if (!(std::isfinite(iv.lo) && std::isfinite(iv.hi) && iv.lo <= iv.hi))
        throw Error(ErrorKind::precondition, "domain box intervals must be finite with lo <= hi");
    if (predicate_ && (predicate_->variables() & ~kSpatialVars) != 0)
      throw Error(ErrorKind::invalid_spec, "domain predicate may only use x1, x2, x3");
  }

  static DomainBox cube(double lo, double hi, std::optional<Expr> predicate = std::nullopt) {
    return DomainBox({Interval{lo, hi}, Interval{lo, hi}, Interval{lo, hi}}, std::move(predicate));
  }

  const std::array<Interval, 3>& box() const { return box_; }
  const Interval& axis(int i) const { return box_.at(static_cast<std::size_t>(i - 1)); }
  const std::optional<Expr>& predicate() const { return predicate_; }

  bool in_box(const Point& x) const {
    for (std::size_t a = 0; a < 3; ++a)
      if (!box_[a].contains(x[a])) return false;
    return true;
  }

  /// Box membership and |predicate| > 1e-12. A predicate that cannot be
  /// evaluated at x counts as "outside".
  bool contains(const Point& x) const {
    if (!in_box(x)) return false;
    if (!predicate_) return true;
    try {
      return std::abs(eval(*predicate_, x)) > kPredicateFloor;
    } catch (const Error&) {
      return false;
    }
  }

  /// Signs per axis when the box lies inside one open octant.
  std::optional<std::array<int, 3>> octant() const {
    std::array<int, 3> s{};
    for (std::size_t a = 0; a < 3; ++a) {
      if (!box_[a].excludes_zero()) return std::nullopt;
      s[a] = box_[a].lo > 0.0 ? 1 : -1;
    }
    return s;
  }

 private:
  std::array<Interval, 3> box_{Interval{0.0, 1.0}, Interval{0.0, 1.0}, Interval{0.0, 1.0}};
  std::optional<Expr> predicate_;
};

// ---------------------------------------------------------------------------
// Counter-based sampling: draw number d depends only on (seed, d), so results
// do not depend on evaluation order or worker count.

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline Point uniform_box_point(const DomainBox& domain, std::uint64_t seed, std::uint64_t draw) {
  std::mt19937_64 gen(mix_seed(seed, draw));
  Point x{};
  for (std::size_t a = 0; a < 3; ++a) {
    double f = std::generate_canonical<double, 53>(gen);
    x[a] = domain.box()[a].at(f);
  }
  return x;
}

/// Up to `n` uniformly drawn domain points, filtered by the predicate.
/// Gives up after 100·n draws; fewer than n/10 accepted points means the
/// domain is treated as empty.
inline std::vector<Point> sample_domain(const DomainBox& domain, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorKind::precondition, "sample count must be >= 1");
  std::vector<Point> points;
  points.reserve(n);
  const std::uint64_t max_draws = 100ull * n;
  for (std::uint64_t d = 0; d < max_draws && points.size() < n; ++d) {
    Point x = uniform_box_point(domain, seed, d);
    if (domain.contains(x)) points.push_back(x);
  }
  if (points.size() < std::max<std::size_t>(1, n / 10))
    throw Error(ErrorKind::precondition, "domain is empty after predicate filtering (" + std::to_string(points.size()) +
                                             " of " + std::to_string(n) + " requested points accepted)");
  return points;
}

}  // namespace poisson3d
