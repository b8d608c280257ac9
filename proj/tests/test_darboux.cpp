#include "support/random_family.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace poisson3d;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
namespace pt = poisson3d::testing;

namespace {
PoissonFamilySpec wide_halphen() {
  return halphen_structure(halphen_domain({Interval{-10, 10}, Interval{-10, 10}, Interval{-10, 10}}));
}
ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::invalid_spec;
}
}  // namespace

TEST_CASE("Halphen chart maps") {
  auto chart = build_chart(wide_halphen(), 3);
  CHECK(chart.i() == 1);
  CHECK(chart.j() == 2);
  CHECK_FALSE(chart.sign_branch());
  CHECK(forward_map(chart, {1, 2, 4}) == Point{1, 2, -2});
  CHECK(inverse_map(chart, {1, 2, -2}) == Point{1, 2, 4});
  for (const auto& x : sample_domain(halphen_domain({Interval{0, 1}, Interval{0, 1}, Interval{0, 1}}), 200, 4)) {
    Point y = forward_map(chart, x);
    CHECK(y[0] == x[0]);
    CHECK(y[1] == x[1]);
    CHECK_THAT(y[2], WithinRel(-(x[1] - x[2]) / (x[0] - x[1]), 1e-14));
  }
}

TEST_CASE("Halphen factor and pushforward at (1,2,-2)") {
  auto chart = build_chart(wide_halphen(), 3);
  Point y{1, 2, -2};
  double f = reparam_factor(chart, y);
  CHECK_THAT(f, WithinRel(-1.0 / 12, 1e-15));
  CHECK_THAT(f, WithinRel(1.0 / (2 * (y[0] - y[1]) * (y[0] - y[1]) * y[2] * (1 - y[2])), 1e-15));
  for (auto mode : {JacobianMode::analytic, JacobianMode::finite_difference}) {
    auto jp = pushforward_matrix(chart, y, mode);
    CHECK_THAT(jp.j12, WithinRel(-1.0 / 12, mode == JacobianMode::analytic ? 1e-14 : 1e-8));
    CHECK(std::abs(jp.j23) <= 1e-9);
    CHECK(std::abs(jp.j31) <= 1e-9);
  }
}

TEST_CASE("Euler-top chart") {
  auto params = EulerTopParams::from_inertia(1, 2, 3);
  auto chart = build_chart(euler_top_structure(params), 3);
  REQUIRE(chart.sign_branch());
  CHECK((*chart.sign_branch())[2] == 1);
  Point y = forward_map(chart, {1, 1, 1});
  CHECK(y[0] == 1);
  CHECK(y[1] == 1);
  CHECK_THAT(y[2], WithinRel(7.0 / 15, 1e-14));
  const auto& a = params.alpha;
  double x3 = std::sqrt((a[2] / a[1]) * y[1] * y[1] + ((a[2] / a[0]) * y[0] * y[0] - (a[2] / a[1]) * y[1] * y[1]) * y[2]);
  CHECK_THAT(x3, WithinRel(1.0, 1e-14));
  CHECK_THAT(inverse_map(chart, y)[2], WithinRel(1.0, 1e-14));

  // The negative octant selects the other square-root branch.
  DomainBox neg({Interval{0.5, 2}, Interval{0.5, 2}, Interval{-2, -0.5}});
  auto nchart = build_chart(euler_top_structure(params, neg), 3);
  CHECK((*nchart.sign_branch())[2] == -1);
  CHECK_THAT(inverse_map(nchart, forward_map(nchart, {1, 1, -1}))[2], WithinRel(-1.0, 1e-14));
}

TEST_CASE("chart hypothesis violations") {
  DomainBox plain = DomainBox::cube(0, 1);
  auto f = [&](int a) { return build_scalar_field(lit(1), u(), u(), plain.axis(a)); };
  auto spec = PoissonFamilySpec::create("plain", lit(1), {f(1), f(2), f(3)}, make_kappa(0, 0), plain);
  CHECK(kind_of([&] { build_chart(spec, 3); }) == ErrorKind::hypothesis_violation);
  CHECK(kind_of([&] { build_chart(spec, 1); }) == ErrorKind::hypothesis_violation);
  // A zero of chi_12 strictly between grid nodes is still found.
  DomainBox box({Interval{0, 1}, Interval{0, 1}, Interval{5, 6}});
  auto g = [&](int a) { return build_scalar_field(lit(1), u(), u(), box.axis(a)); };
  auto shifted = PoissonFamilySpec::create("s", lit(1), {g(1), g(2), g(3)}, make_kappa(0.0301, 0), box);
  CHECK(kind_of([&] { build_chart(shifted, 3); }) == ErrorKind::hypothesis_violation);
  CHECK_NOTHROW(build_chart(shifted, 1));
}

TEST_CASE("best conditioned k") {
  DomainBox box({Interval{0, 1}, Interval{5, 6}, Interval{0.2, 0.8}});
  auto f = [&](int a) { return build_scalar_field(lit(1), u(), u(), box.axis(a)); };
  auto spec = PoissonFamilySpec::create("s", lit(1), {f(1), f(2), f(3)}, make_kappa(0, 0), box);
  // chi_12 and chi_23 stay at least 4 away from 0; chi_31 crosses 0.
  int k = best_conditioned_k(spec);
  CHECK((k == 3 || k == 1));
  CHECK(build_chart(spec).k() == k);
}

TEST_CASE("inverse map errors") {
  auto chart = build_chart(euler_top_structure(EulerTopParams::from_inertia(1, 2, 3)), 3);
  CHECK(kind_of([&] { inverse_map(chart, {1, 1, 100}); }) == ErrorKind::out_of_range);
  CHECK_THROWS_AS(build_scalar_field(parse("2*u"), parse("u^2"), parse("-sqrt(u)"), {0.5, 2}), Error);
}

TEST_CASE("canonical form for the built-in charts") {
  for (auto spec : {halphen_structure(), circle_maps_structure(), euler_top_structure(EulerTopParams::from_inertia(1, 2, 3))}) {
    for (int k = 1; k <= 3; ++k) {
      std::optional<DarbouxChart> maybe;
      try {
        maybe.emplace(build_chart(spec, k));
      } catch (const Error& e) {
        CHECK(k != 3);
        CHECK(e.kind() == ErrorKind::hypothesis_violation);
        continue;
      }
      const auto& chart = *maybe;
      auto r = canonical_check(chart, 300, 17);
      INFO(spec.name() << " k=" << k);
      CHECK(r.pass);
      CHECK(r.max_roundtrip_error <= 1e-10);
      CHECK(r.max_deviation <= 1e-8);
      CHECK(r.max_decoupling <= 1e-8);
      CHECK(r.max_factor_mismatch <= 1e-8);
    }
  }
  auto fd = canonical_check(build_chart(euler_top_structure(EulerTopParams::from_inertia(1, 2, 3)), 3), 200, 5,
                            JacobianMode::finite_difference);
  CHECK(fd.max_deviation <= 1e-6);
}

TEST_CASE("factor sign is constant on a connected chamber") {
  DomainBox chamber = halphen_domain({Interval{0, 0.3}, Interval{0.35, 0.65}, Interval{0.7, 1}});
  auto r = canonical_check(build_chart(halphen_structure(chamber), 3), 500, 3);
  CHECK(r.pass);
  CHECK(r.factor_sign_constant);
  auto top = canonical_check(build_chart(euler_top_structure(EulerTopParams::from_inertia(1, 2, 3)), 3), 500, 3);
  CHECK(top.factor_sign_constant);
}

TEST_CASE("charts on random members with a global hypothesis") {
  std::mt19937_64 rng(41);
  int charts = 0;
  while (charts < 15) {
    auto spec = pt::random_family(rng);
    for (int k = 1; k <= 3; ++k) {
      std::optional<DarbouxChart> chart;
      try {
        chart.emplace(build_chart(spec, k));
      } catch (const Error&) {
        continue;
      }
      auto r = canonical_check(*chart, 100, 2);
      INFO("k=" << k << " dev " << r.max_deviation << " rt " << r.max_roundtrip_error);
      CHECK(r.max_deviation <= 1e-8);
      CHECK(r.max_roundtrip_error <= 1e-10);
      ++charts;
    }
  }
}

TEST_CASE("Darboux-canonical spec under the identity-like chart") {
  // eta = 1 / (chi_12 phi_3) with unit densities: J12 is constant 1 in x.
  DomainBox box({Interval{0.5, 1.5}, Interval{2, 3}, Interval{3.5, 4.5}});
  auto f = [&](int a) { return build_scalar_field(lit(1), u(), u(), box.axis(a)); };
  auto spec = PoissonFamilySpec::create("c", 1.0 / (x1() - x2()), {f(1), f(2), f(3)}, make_kappa(0, 0), box);
  auto chart = build_chart(spec, 3);
  for (const auto& x : sample_domain(box, 50, 1)) {
    Point y = forward_map(chart, x);
    CHECK_THAT(reparam_factor(chart, y), WithinAbs(1.0, 1e-14));
    auto jp = pushforward_matrix(chart, y);
    CHECK_THAT(jp.j12, WithinAbs(1.0, 1e-12));
  }
}
