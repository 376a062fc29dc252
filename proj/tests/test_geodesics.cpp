#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <string>

#include "doctest.h"
#include "finslerlab/errors.hpp"
#include "finslerlab/geodesics.hpp"
#include "finslerlab/rng.hpp"

using namespace finsler;
using domain::Domain;
using geodesics::GeodesicOptions;
namespace geo = finsler::geodesics;

namespace {

const domain::DomainPtr& ball() {
  static auto d = Domain::ball();
  return d;
}

const domain::DomainPtr& egg2() {
  static auto d = Domain::egg(2);
  return d;
}

const metrics::MetricPtr& ball_upper() {
  static auto m = metrics::make_convex_band(ball(), metrics::BandSide::upper);
  return m;
}

const metrics::MetricPtr& ball_lower() {
  static auto m = metrics::make_convex_band(ball(), metrics::BandSide::lower);
  return m;
}

const metrics::MetricPtr& ball_euclid() {
  static auto m = metrics::make_euclidean_scaled(ball(), 1.0);
  return m;
}

const metrics::MetricPtr& egg_catlin() {
  static auto m = metrics::make_catlin_global(egg2());
  return m;
}

// away from the boundary so chords are feasible and no fiber routing kicks in
C2 random_ball_point(Rng& rng, double max_r = 0.85) {
  for (;;) {
    C2 z = rng.gaussian_c2() * 0.35;
    if (norm(z) < max_r) return z;
  }
}

GeodesicOptions medium() {
  GeodesicOptions o;
  o.waypoints = 8;
  o.restarts = 2;
  o.max_iters = 40;
  o.tol = 1e-3;
  o.descent_quad = 3;
  o.max_waypoints = 32;
  return o;
}

}  // namespace

TEST_CASE("path length reproduces closed forms") {
  // straight segment, unit euclidean metric
  geo::Path seg;
  seg.waypoints = {C2(-0.35, 0.0, 0.0, 0.0), C2(0.35, 0.0, 0.0, 0.0)};
  CHECK(geo::path_length(*ball_euclid(), seg) == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(seg.euclid_length == doctest::Approx(0.7).epsilon(1e-12));
  // deepest of the 8 sub-samples sits at t = 4/9, a hair off the center
  CHECK(seg.H == doctest::Approx(1.0 - 0.7 / 18.0).epsilon(1e-9));

  // chord 0 -> (0.5, 0) under the upper band: integral of dt/(1-t) = log 2
  geo::Path chord;
  chord.waypoints = {C2(0.0, 0.0), C2(cplx(0.5, 0.0), 0.0)};
  CHECK(geo::path_length(*ball_upper(), chord) == doctest::Approx(std::log(2.0)).epsilon(1e-5));

  // degenerate path
  geo::Path still;
  still.waypoints = {C2(0.1, 0.2, 0.0, 0.1), C2(0.1, 0.2, 0.0, 0.1)};
  CHECK(geo::path_length(*ball_euclid(), still) == 0.0);

  // an exiting segment names itself
  geo::Path out;
  out.waypoints = {C2(0.0, 0.0), C2(cplx(1.5, 0.0), 0.0), C2(cplx(0.5, 0.0), 0.0)};
  try {
    geo::path_length(*ball_euclid(), out);
    FAIL("expected path_exits_domain");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::path_exits_domain);
    CHECK(std::string(e.what()).find("segment 0") != std::string::npos);
  }
}

TEST_CASE("straight chords are optimal under the euclidean metric") {
  Rng rng(101);
  for (int n = 0; n < 10; ++n) {
    C2 x = random_ball_point(rng);
    C2 y = random_ball_point(rng);
    auto d = geo::geodesic(ball_euclid(), x, y, medium());
    CHECK(d.value == doctest::Approx(dist(x, y)).epsilon(1e-4));
    CHECK(d.method == geo::Method::optimizer);
    CHECK(d.path.waypoints.front().array() == x.array());
    CHECK(d.path.waypoints.back().array() == y.array());
  }
}

TEST_CASE("band optimizers bracket the exact ball distance") {
  C2 x(0.0, 0.0);
  C2 y(cplx(0.5, 0.0), 0.0);
  auto up = geo::geodesic(ball_upper(), x, y);
  auto low = geo::geodesic(ball_lower(), x, y);
  double exact = std::atanh(0.5);  // 0.549306

  // frozen window: arctanh 0.5 from the band, log 2 from the chord integral
  CHECK(up.value >= 0.5493);
  CHECK(up.value <= 0.6932);
  CHECK(low.value == doctest::Approx(0.5 * up.value).epsilon(1e-3));
  CHECK(0.98 * low.value <= exact);
  CHECK(exact <= 1.02 * up.value);

  // second pair off the axis
  C2 y2(cplx(0.2, 0.0), cplx(0.0, 0.6));
  double exact2 = std::atanh(norm(y2));
  auto up2 = geo::geodesic(ball_upper(), x, y2);
  auto low2 = geo::geodesic(ball_lower(), x, y2);
  CHECK(0.98 * low2.value <= exact2);
  CHECK(exact2 <= 1.02 * up2.value);

  // determinism: repeated invocations are bitwise identical
  auto again = geo::geodesic(ball_upper(), x, y);
  CHECK(again.value == up.value);
  CHECK(again.path.waypoints.size() == up.path.waypoints.size());
}

TEST_CASE("fiber distances are exact") {
  auto d = geo::fiber_distance(egg2(), C2(0.0, 0.9), C2(0.0, 0.8));
  CHECK(d.value == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(d.method == geo::Method::fiber_exact);
  CHECK(d.error_estimate == 0.0);
  CHECK(d.path.H == doctest::Approx(0.2).epsilon(1e-9));

  // ball fiber of (1, 0) at depths 0.05 and 0.2
  auto b = geo::fiber_distance(ball(), C2(cplx(0.95, 0.0), 0.0), C2(cplx(0.8, 0.0), 0.0));
  CHECK(b.value == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  // degenerate pair
  auto z = geo::fiber_distance(ball(), C2(0.3, 0.0), C2(0.3, 0.0));
  CHECK(z.value == 0.0);

  // distinct fibers are rejected
  CHECK_THROWS_AS((void)geo::fiber_distance(egg2(), C2(0.0, 0.9), C2(cplx(0.05, 0.0), cplx(0.88, 0.0))),
                  Error);
  CHECK_THROWS_AS((void)geo::fiber_distance(ball(), C2(cplx(1.5, 0.0), 0.0), C2(0.0, 0.0)), Error);
}

TEST_CASE("optimizer reproduces the fiber distance on the egg") {
  auto d = geo::geodesic(egg_catlin(), C2(0.0, 0.9), C2(0.0, 0.8), medium());
  double expect = std::log(2.0);
  CHECK(d.value == doctest::Approx(expect).epsilon(0.01));
  // the exact fiber value is a true lower bound for the collar metric
  CHECK(d.value >= expect - d.error_estimate - 1e-9);
  CHECK(d.method == geo::Method::optimizer);
}

TEST_CASE("grid oracle recovers chords and cross-validates the optimizer") {
  C2 x(0.0, 0.0);
  C2 y(cplx(0.5, 0.0), 0.0);

  auto flat = geo::grid_oracle_distance(ball_euclid(), x, y, 0.05);
  CHECK(flat.value == doctest::Approx(0.5).epsilon(0.05));
  CHECK(flat.method == geo::Method::grid_oracle);

  auto same = geo::grid_oracle_distance(ball_euclid(), x, x, 0.05);
  CHECK(same.value == 0.0);

  auto oracle = geo::grid_oracle_distance(ball_upper(), x, y, 0.025);
  auto opt = geo::geodesic(ball_upper(), x, y);
  double tol = std::max(0.05 * opt.value, 2.0 * 0.025);
  CHECK(std::abs(oracle.value - opt.value) <= tol);
  CHECK(opt.value <= oracle.value + tol);  // the oracle family bounds from above
}

TEST_CASE("upper bound chain holds on random pairs") {
  Rng rng(202);
  for (int n = 0; n < 8; ++n) {
    C2 x = random_ball_point(rng, 0.8);
    C2 y = random_ball_point(rng, 0.8);
    if (dist(x, y) < 0.1) continue;
    auto opt = geo::geodesic(ball_upper(), x, y, medium());
    auto chord = geo::chord_upper(ball_upper(), x, y);
    CHECK(opt.value <= chord.value * (1.0 + 1e-9) + 1e-12);
    if (n < 3) {
      // the 8-neighborhood lattice overshoots curved routes by up to
      // cos(22.5 deg) + (sqrt 2 - 1) sin(22.5 deg) - 1, about 8.2 percent
      auto oracle = geo::grid_oracle_distance(ball_upper(), x, y, 0.03);
      double tol = 0.09 * oracle.value + 2.0 * 0.03;
      CHECK(opt.value >= oracle.value - tol);
      CHECK(opt.value <= oracle.value + tol);
    }
  }
}

TEST_CASE("distances are approximately symmetric") {
  Rng rng(303);
  auto fast = GeodesicOptions::fast_profile();
  for (int n = 0; n < 100; ++n) {
    C2 x = random_ball_point(rng);
    C2 y = random_ball_point(rng);
    if (dist(x, y) < 0.05) continue;
    auto a = geo::geodesic(ball_upper(), x, y, fast);
    auto b = geo::geodesic(ball_upper(), y, x, fast);
    double err = 2.0 * std::max(a.error_estimate, b.error_estimate);
    CHECK(std::abs(a.value - b.value) <= err + 1e-9);
  }
}

TEST_CASE("triangle inequality holds up to folded errors") {
  Rng rng(404);
  auto fast = GeodesicOptions::fast_profile();
  for (int n = 0; n < 100; ++n) {
    C2 x = random_ball_point(rng);
    C2 y = random_ball_point(rng);
    C2 z = random_ball_point(rng);
    auto dxy = geo::geodesic(ball_upper(), x, y, fast);
    auto dyz = geo::geodesic(ball_upper(), y, z, fast);
    auto dxz = geo::geodesic(ball_upper(), x, z, fast);
    double err =
        3.0 * std::max({dxy.error_estimate, dyz.error_estimate, dxz.error_estimate});
    CHECK(dxz.value <= dxy.value + dyz.value + err + 1e-9);
  }
}

TEST_CASE("collar pairs respect the fiber lower bound") {
  Rng rng(505);
  auto fast = GeodesicOptions::fast_profile();
  for (int n = 0; n < 12; ++n) {
    C2 x = egg2()->random_collar_point(rng, 0.01, 0.15);
    C2 y = egg2()->random_collar_point(rng, 0.01, 0.15);
    double dx = egg2()->collar_probe(x).delta;
    double dy = egg2()->collar_probe(y).delta;
    auto d = geo::geodesic(egg_catlin(), x, y, fast);
    CHECK(d.value >= std::abs(std::log(dy / dx)) - d.error_estimate - 1e-9);
  }
}

TEST_CASE("doubling the waypoint count never raises the value beyond tol") {
  C2 x(cplx(-0.2, 0.1), cplx(0.0, -0.3));
  C2 y(cplx(0.5, 0.0), cplx(0.2, 0.1));
  GeodesicOptions coarse = medium();
  coarse.waypoints = 8;
  coarse.max_waypoints = 8;
  GeodesicOptions fine = coarse;
  fine.max_waypoints = 16;
  auto a = geo::geodesic(ball_upper(), x, y, coarse);
  auto b = geo::geodesic(ball_upper(), x, y, fine);
  CHECK(b.value <= a.value * (1.0 + coarse.tol) + 1e-12);
}

TEST_CASE("shallow endpoints route through fiber legs") {
  // same fiber: the chord competitor recovers the exact log ratio
  C2 x = egg2()->fiber_point(C2(0.0, 1.0), 5e-5);
  C2 y = egg2()->fiber_point(C2(0.0, 1.0), 2e-4);
  auto fast = GeodesicOptions::fast_profile();
  auto d = geo::geodesic(egg_catlin(), x, y, fast);
  CHECK(d.value == doctest::Approx(std::log(4.0)).epsilon(0.02));
  CHECK(d.value >= std::log(4.0) - d.error_estimate - 1e-9);

  // distinct fibers: finite value dominated by the climb out of depth 5e-5
  C2 w = egg2()->fiber_point(C2(1.0, 0.0), 0.05);
  auto far = geo::geodesic(egg_catlin(), x, w, fast);
  CHECK(std::isfinite(far.value));
  double ratio = std::abs(std::log(0.05 / 5e-5));
  CHECK(far.value >= ratio - far.error_estimate - 1e-9);
  CHECK(far.path.waypoints.size() >= 4);
}

TEST_CASE("argument and resolution errors") {
  C2 outside(cplx(1.5, 0.0), 0.0);
  CHECK_THROWS_AS((void)geo::geodesic(ball_upper(), outside, C2(0.0, 0.0)), Error);
  CHECK_THROWS_AS((void)geo::grid_oracle_distance(ball_upper(), outside, C2(0.0, 0.0), 0.05),
                  Error);
  // endpoints deeper than the lattice can resolve
  try {
    (void)geo::grid_oracle_distance(ball_upper(), C2(cplx(0.98, 0.0), 0.0),
                                    C2(cplx(0.9, 0.0), 0.0), 0.1);
    FAIL("expected endpoints_not_connectable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::endpoints_not_connectable);
  }
  CHECK(std::string(geo::method_name(geo::Method::fiber_exact)) == "fiber_exact");
  CHECK(std::string(geo::method_name(geo::Method::chord_upper)) == "chord_upper");
}
