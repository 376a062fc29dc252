#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "doctest.h"
#include "finslerlab/domain.hpp"
#include "finslerlab/errors.hpp"
#include "finslerlab/geodesics.hpp"
#include "finslerlab/hyperbolicity.hpp"
#include "finslerlab/metrics.hpp"
#include "finslerlab/rng.hpp"

using namespace finsler;
namespace hyp = finsler::hyperbolicity;

namespace {

const domain::DomainPtr& ball() {
  static domain::DomainPtr d = domain::Domain::ball();
  return d;
}

const domain::DomainPtr& egg2() {
  static domain::DomainPtr d = domain::Domain::egg(2);
  return d;
}

const metrics::MetricPtr& ball_upper() {
  static metrics::MetricPtr m =
      metrics::make_convex_band(ball(), metrics::BandSide::upper);
  return m;
}

// Path metric of the graph w - a - c - b with unit edges, products based at
// w. Trees satisfy the four-point condition exactly, so delta must be zero.
hyp::GromovSample tree_sample() {
  // points: a, c, b at distances 1, 2, 3 from w
  std::vector<double> base = {1.0, 2.0, 3.0};
  std::vector<std::vector<double>> table = {
      {0.0, 1.0, 2.0},
      {1.0, 0.0, 1.0},
      {2.0, 1.0, 0.0},
  };
  return hyp::sample_from_table(base, table);
}

}  // namespace

TEST_CASE("sample tables are symmetric with a zero diagonal") {
  Rng rng(71);
  std::vector<C2> pts;
  for (int i = 0; i < 6; ++i) {
    C2 p = rng.gaussian_c2() * 0.3;
    while (!(norm(p) < 0.8)) p = rng.gaussian_c2() * 0.3;
    pts.push_back(p);
  }
  auto sample = hyp::build_gromov_sample(
      hyp::optimizer_distance(ball_upper()), C2(0, 0, 0, 0), pts);

  REQUIRE(sample.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(sample.dist(i, i) == 0.0);
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(sample.dist(i, j) == sample.dist(j, i));  // bitwise, one slot
      if (i != j) CHECK(sample.dist(i, j) > 0.0);
    }
  }
  CHECK(sample.max_err() < 0.1);

  // Same cloud, serial fill: the table must not depend on the thread count.
  auto serial = hyp::build_gromov_sample(
      hyp::optimizer_distance(ball_upper()), C2(0, 0, 0, 0), pts, 1);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      CHECK(sample.dist(i, j) == serial.dist(i, j));
}

TEST_CASE("gromov product identities and bounds") {
  Rng rng(72);
  std::vector<C2> pts;
  for (int i = 0; i < 8; ++i) {
    C2 p = rng.gaussian_c2() * 0.3;
    while (!(norm(p) < 0.8)) p = rng.gaussian_c2() * 0.3;
    pts.push_back(p);
  }
  auto s = hyp::build_gromov_sample(hyp::optimizer_distance(ball_upper()),
                                    C2(0, 0, 0, 0), pts);
  const double slack = 2.0 * s.max_err();
  for (std::size_t i = 0; i < s.size(); ++i) {
    // (x|x) = d(x, w) and (x|w) = 0, exactly.
    CHECK(hyp::gromov_product(s, i, i) == s.base_dist[i]);
    CHECK(hyp::gromov_product(s, i, hyp::kBasepoint) == 0.0);
    CHECK(hyp::gromov_product(s, hyp::kBasepoint, i) == 0.0);
    for (std::size_t j = 0; j < s.size(); ++j) {
      const double p = hyp::gromov_product(s, i, j);
      CHECK(p >= 0.0);
      CHECK(p <= std::min(s.base_dist[i], s.base_dist[j]) + slack);
      CHECK(p == hyp::gromov_product(s, j, i));
    }
  }
  CHECK_THROWS_AS(hyp::gromov_product(s, 0, 99), const Error&);
}

TEST_CASE("tree tables and tiny samples have zero delta") {
  auto tree = tree_sample();
  CHECK(hyp::delta_estimate(tree) == 0.0);

  // Products against the table: (a|c)_w = 1, (a|b)_w = 1, (c|b)_w = 2.
  CHECK(hyp::gromov_product(tree, 0, 1) == doctest::Approx(1.0));
  CHECK(hyp::gromov_product(tree, 0, 2) == doctest::Approx(1.0));
  CHECK(hyp::gromov_product(tree, 1, 2) == doctest::Approx(2.0));

  auto two = hyp::sample_from_table({1.0, 2.0}, {{0.0, 1.5}, {1.5, 0.0}});
  CHECK(hyp::delta_estimate(two) == 0.0);

  CHECK_THROWS_AS(
      hyp::sample_from_table({1.0, 2.0}, {{0.0, 1.5}, {1.0, 0.0}}),
      const Error&);
  CHECK_THROWS_AS(hyp::sample_from_table({1.0}, {{0.5}}), const Error&);
}

TEST_CASE("delta estimate is monotone under sample growth") {
  Rng rng(73);
  std::vector<C2> pts;
  for (int i = 0; i < 14; ++i) {
    C2 p = rng.gaussian_c2() * 0.35;
    while (!(norm(p) < 0.85)) p = rng.gaussian_c2() * 0.35;
    pts.push_back(p);
  }
  auto s = hyp::build_gromov_sample(hyp::optimizer_distance(ball_upper()),
                                    C2(0, 0, 0, 0), pts);
  const double full = hyp::delta_estimate(s);
  CHECK(std::isfinite(full));
  double prev = 0.0;
  for (std::size_t n = 4; n <= s.size(); n += 2) {
    const double d = hyp::delta_estimate(hyp::prefix_sample(s, n));
    CHECK(d >= prev - 1e-15);  // max over a superset of triples
    CHECK(d <= full + 1e-15);
    prev = d;
  }

  // Subsampled enumeration stays within the exhaustive value and is
  // deterministic for a fixed seed.
  hyp::DeltaOptions sub;
  sub.full_enum_limit = 4;
  sub.subsample_triples = 20000;
  const double d1 = hyp::delta_estimate(s, sub);
  const double d2 = hyp::delta_estimate(s, sub);
  CHECK(d1 == d2);
  CHECK(d1 <= full + 1e-15);
}

TEST_CASE("visual metric values and the reported quasi constant") {
  auto tree = tree_sample();
  for (double eps : {0.5, 1.0}) {
    for (std::size_t i = 0; i < tree.size(); ++i)
      for (std::size_t j = 0; j < tree.size(); ++j) {
        const double rho =
            hyp::visual_metric(hyp::gromov_product(tree, i, j), eps);
        CHECK(rho > 0.0);
        CHECK(rho ==
              hyp::visual_metric(hyp::gromov_product(tree, j, i), eps));
      }
    // A tree is 0-hyperbolic, so the reported constant collapses to 1.
    CHECK(hyp::visual_quasi_constant(tree, eps) == doctest::Approx(1.0));
  }
  CHECK(hyp::visual_metric(0.0, 1.0) == 1.0);
}

TEST_CASE("boundary products converge on antipodal ball points") {
  const C2 a(1.0, 0.0, 0.0, 0.0);
  const C2 b(-1.0, 0.0, 0.0, 0.0);
  auto res = hyp::boundary_gromov_product(
      hyp::optimizer_distance(ball_upper()), ball(), a, b, C2(0, 0, 0, 0),
      hyp::default_depths(*ball()));
  CHECK(std::isfinite(res.value));
  CHECK(res.error < 0.05);
  CHECK(res.sequence.size() == 7);
  // Antipodal points on the unit sphere: geodesics to the basepoint and
  // between the fibers all run along the same diameter, so the product stays
  // near zero.
  CHECK(res.value < 0.5);

  CHECK_THROWS_AS(hyp::boundary_gromov_product(
                      hyp::optimizer_distance(ball_upper()), ball(), a, a,
                      C2(0, 0, 0, 0), hyp::default_depths(*ball())),
                  const Error&);
}

TEST_CASE("synthetic gauge table recovers slope one") {
  // d(x,y) = g1(x,y) exactly; the product telescopes to -log|a-b| + const,
  // so the fitted slope must be 1 up to quadrature-free arithmetic noise.
  auto dist_fn = hyp::gauge_distance(ball(), 1);
  auto pairs = hyp::boundary_pairs_from_spec(ball(), "geodesic-net:24");
  REQUIRE(pairs.size() >= 20);
  auto fit = hyp::holder_fit(dist_fn, ball(), pairs, C2(0, 0, 0, 0), 1.0);
  CHECK(fit.pair_count == pairs.size());
  CHECK(fit.r_max / fit.r_min >= 10.0);
  CHECK(fit.slope == doctest::Approx(1.0).epsilon(0.05));

  // eps-covariance: halving eps halves the fitted exponent.
  auto half = hyp::holder_fit(dist_fn, ball(), pairs, C2(0, 0, 0, 0), 0.5);
  CHECK(half.slope == doctest::Approx(0.5 * fit.slope).epsilon(1e-9));
}

TEST_CASE("pair generators and list files") {
  auto pairs = hyp::boundary_pairs_from_spec(ball(), "geodesic-net:30");
  CHECK(pairs.size() >= 28);
  double rmin = 1e300, rmax = 0.0;
  for (const auto& [a, b] : pairs) {
    CHECK(std::abs(ball()->defining_value(a)) < 1e-7);
    CHECK(std::abs(ball()->defining_value(b)) < 1e-7);
    const double r = dist(a, b);
    rmin = std::min(rmin, r);
    rmax = std::max(rmax, r);
  }
  CHECK(rmax / rmin >= 10.0);

  // Generators are deterministic.
  auto again = hyp::boundary_pairs_from_spec(ball(), "geodesic-net:30");
  REQUIRE(again.size() == pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i)
    CHECK(dist(pairs[i].first, again[i].first) == 0.0);

  CHECK_THROWS_AS(hyp::boundary_pairs_from_spec(ball(), "geodesic-net:x"),
                  const Error&);
  CHECK_THROWS_AS(hyp::boundary_pairs_from_spec(ball(), "/nonexistent/pairs"),
                  const Error&);

  // Round-trip through a list file.
  const char* path = "hyp_pairs_roundtrip.txt";
  {
    std::FILE* f = std::fopen(path, "w");
    REQUIRE(f != nullptr);
    std::fprintf(f, "# two explicit pairs\n");
    for (int i = 0; i < 2; ++i) {
      const auto& [a, b] = pairs[i];
      std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                   a.z1.real(), a.z1.imag(), a.z2.real(), a.z2.imag(),
                   b.z1.real(), b.z1.imag(), b.z2.real(), b.z2.imag());
    }
    std::fclose(f);
  }
  auto loaded = hyp::boundary_pairs_from_spec(ball(), path);
  REQUIRE(loaded.size() == 2);
  CHECK(dist(loaded[0].first, pairs[0].first) < 1e-15);
  CHECK(dist(loaded[1].second, pairs[1].second) < 1e-15);
  std::remove(path);
}

TEST_CASE("holder fit preconditions") {
  auto dist_fn = hyp::gauge_distance(ball(), 1);
  auto pairs = hyp::boundary_pairs_from_spec(ball(), "geodesic-net:24");

  std::vector<std::pair<C2, C2>> few(pairs.begin(), pairs.begin() + 5);
  CHECK_THROWS_WITH_AS(
      hyp::holder_fit(dist_fn, ball(), few, C2(0, 0, 0, 0)),
      doctest::Contains("at least 20"), const Error&);

  // 20 copies of one separation scale: no decade span.
  std::vector<std::pair<C2, C2>> flat;
  for (int i = 0; i < 20; ++i) flat.push_back(pairs[0]);
  CHECK_THROWS_WITH_AS(hyp::holder_fit(dist_fn, ball(), flat, C2(0, 0, 0, 0)),
                       doctest::Contains("insufficient decade span"),
                       const Error&);
}

TEST_CASE("collar sample on the egg yields a finite stable delta") {
  // Small prefix-vs-full stability probe; the acceptance harness runs the
  // full 200-point version.
  auto metric = metrics::make_catlin_global(egg2());
  Rng rng(74);
  std::vector<C2> pts;
  for (int i = 0; i < 24; ++i)
    pts.push_back(egg2()->random_collar_point(rng, 1e-3, 0.15));
  auto s = hyp::build_gromov_sample(hyp::optimizer_distance(metric),
                                    C2(0, 0, 0, 0), pts);
  const double full = hyp::delta_estimate(s);
  const double half = hyp::delta_estimate(hyp::prefix_sample(s, 12));
  CHECK(std::isfinite(full));
  CHECK(full > 0.0);
  CHECK(half <= full + 1e-15);
}
