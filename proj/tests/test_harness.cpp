#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "finslerlab/domain.hpp"
#include "finslerlab/errors.hpp"
#include "finslerlab/geodesics.hpp"
#include "finslerlab/harness.hpp"
#include "finslerlab/metrics.hpp"

using namespace finsler;
namespace hn = finsler::harness;

namespace {

const domain::DomainPtr& ball() {
  static domain::DomainPtr d = domain::Domain::ball();
  return d;
}

const domain::DomainPtr& egg2() {
  static domain::DomainPtr d = domain::Domain::egg(2);
  return d;
}

const metrics::MetricPtr& egg2_catlin() {
  static metrics::MetricPtr m = metrics::make_catlin_global(egg2());
  return m;
}

hn::SampleSpec small_spec(std::size_t cal, std::size_t hold,
                          std::uint64_t seed) {
  hn::SampleSpec spec;
  spec.calibration = cal;
  spec.holdout = hold;
  spec.depth_min = 1e-3;
  spec.depth_max = 5e-2;
  spec.seed = seed;
  return spec;
}

std::string write_temp_suite(const std::string& name,
                             const std::string& body) {
  std::ofstream out(name);
  REQUIRE(out.good());
  out << body;
  out.close();
  return name;
}

}  // namespace

TEST_CASE("collar pair sampler is stratified and deterministic") {
  const auto pairs =
      hn::sample_collar_pairs(ball(), 12, 1e-3, 1e-1, 41);
  const auto again =
      hn::sample_collar_pairs(ball(), 12, 1e-3, 1e-1, 41);
  REQUIRE(pairs.size() == 12);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(dist(pairs[i].first, again[i].first) == 0.0);
    CHECK(dist(pairs[i].second, again[i].second) == 0.0);
    const auto px = ball()->collar_probe(pairs[i].first);
    const auto py = ball()->collar_probe(pairs[i].second);
    CHECK(px.delta >= 1e-3 * 0.999);
    CHECK(px.delta <= 1e-1 * 1.001);
    CHECK(py.delta <= 1e-1 * 1.001);
    CHECK(dist(pairs[i].first, pairs[i].second) > 1e-12);
    if (i % 3 == 0) {
      // fiber stratum: both endpoints project to the same boundary foot
      const C2 fx = pairs[i].first + px.normal * px.delta;
      const C2 fy = pairs[i].second + py.normal * py.delta;
      CHECK(dist(fx, fy) < 1e-5);
    }
  }
}

TEST_CASE("slow condition is structural for the catlin metric") {
  const auto rep = hn::check_slow_fmet(egg2_catlin(), hn::auto_bounds(), small_spec(8, 8, 7),
                                       hn::SlowFmetPart::slow);
  CHECK(rep.status == hn::CheckStatus::passed);
  CHECK(rep.constant("alpha") == 1.0);
  CHECK(rep.holdout_violations == 0);
  // the optimizer only overestimates distances, so the fitted defect stays
  // within the folded error scale
  CHECK(rep.constant("C1") < 0.5);
}

TEST_CASE("lower convex band reproduces the halved slow exponent") {
  const auto metric =
      metrics::make_convex_band(ball(), metrics::BandSide::lower);
  const auto rep = hn::check_slow_fmet(metric, hn::auto_bounds(), small_spec(8, 8, 9),
                                       hn::SlowFmetPart::slow);
  CHECK(rep.status == hn::CheckStatus::passed);
  CHECK(rep.constant("alpha") == 0.5);
  CHECK(rep.holdout_violations == 0);
  CHECK(rep.constant("C1") < 0.5);
}

TEST_CASE("fmet fit finds a positive floor constant") {
  auto spec = small_spec(30, 30, 11);
  const auto rep = hn::check_slow_fmet(egg2_catlin(), hn::auto_bounds(), spec,
                                       hn::SlowFmetPart::fmet);
  CHECK(rep.status == hn::CheckStatus::passed);
  CHECK(rep.constant("beta") == doctest::Approx(0.25));
  CHECK(rep.constant("C2") > 0.0);
  CHECK(rep.holdout_violations == 0);
}

TEST_CASE("finsler lower bound check fits and gates on its premise") {
  const auto rep =
      hn::check_fin_lower(egg2_catlin(), hn::auto_bounds(), small_spec(8, 8, 13));
  CHECK(rep.status == hn::CheckStatus::passed);
  CHECK(rep.constant("C") >= 0.0);
  CHECK(rep.holdout_violations == 0);

  hn::VerificationReport premise;
  premise.status = hn::CheckStatus::failed;
  const auto gated =
      hn::check_fin_lower(egg2_catlin(), hn::auto_bounds(), small_spec(4, 4, 13),
                          &premise);
  CHECK(gated.status == hn::CheckStatus::skipped);
  CHECK(gated.note.find("premise") != std::string::npos);
}

TEST_CASE("m-convex corollary holds on the ball with the expected premise") {
  const auto rep = hn::check_mco(ball(), small_spec(16, 16, 17));
  CHECK(rep.status == hn::CheckStatus::passed);
  CHECK(!rep.premise_failed);
  // directional boundary distance of the unit ball tops out at
  // sqrt(2 - delta) times sqrt(delta) in the tangential complex line
  CHECK(rep.constant("C_m") > 1.2);
  CHECK(rep.constant("C_m") < 1.5);
  CHECK(rep.constant("m") == 2.0);
  CHECK(rep.holdout_violations == 0);

  CHECK_THROWS_AS(hn::check_mco(domain::Domain::from_poly(
                                    sym::Poly({{1, 1, 0, 0, 1.0},
                                               {0, 0, 1, 1, 1.0},
                                               {2, 2, 1, 1, -4.0},
                                               {0, 0, 0, 0, -1.0}}),
                                    2, C2(0.0, 0.0), 1.3, false, "dent"),
                                small_spec(4, 4, 1)),
                  Error);
}

TEST_CASE("distance sandwich between the two gauges") {
  const auto rep = hn::check_dg(egg2_catlin(), small_spec(10, 10, 19));
  CHECK(rep.status == hn::CheckStatus::passed);
  CHECK(rep.constant("C_lower") >= 0.0);
  CHECK(rep.constant("C_upper") >= 0.0);
  CHECK(rep.holdout_violations == 0);
}

TEST_CASE("gehring hayman ratio floor on a fiber pair") {
  // A straight fiber descent of euclidean length 0.1 pins the admissible
  // constant: 0.1 / 0.1^{1/4} is about 0.178, so any fit fed such a pair
  // cannot come out smaller.
  const auto dom = egg2();
  const C2 foot(0.0, 1.0);
  const C2 x = dom->fiber_point(foot, 0.11);
  const C2 y = dom->fiber_point(foot, 0.01);
  const auto res = geodesics::geodesic(egg2_catlin(), x, y,
                                       geodesics::GeodesicOptions::fast_profile());
  const double exy = dist(x, y);
  CHECK(exy == doctest::Approx(0.1).epsilon(0.01));
  const double ratio = res.path.euclid_length / std::pow(exy, 0.25);
  CHECK(ratio >= 0.177);

  auto spec = small_spec(8, 8, 23);
  spec.depth_max = 1e-1;
  const auto rep = hn::check_gehring_hayman(egg2_catlin(), spec, false);
  CHECK(rep.status == hn::CheckStatus::passed);
  CHECK(rep.constant("C") > 0.0);
  CHECK(rep.holdout_violations == 0);
}

TEST_CASE("grid oracle variant of gehring hayman") {
  const auto metric =
      metrics::make_convex_band(ball(), metrics::BandSide::upper);
  auto spec = small_spec(6, 6, 29);
  spec.depth_min = 3e-2;  // the lattice must resolve the shallower endpoint
  spec.depth_max = 1e-1;
  const auto rep = hn::check_gehring_hayman(metric, spec, true, 150000);
  CHECK(rep.theorem_id == "gh_quasi");
  CHECK(rep.constant("C_prime") > 0.0);
  CHECK(rep.holdout_count + rep.excluded >= 6);
  CHECK(rep.status == hn::CheckStatus::passed);
}

TEST_CASE("capped ball localization is monotone and additively close") {
  const C2 n(-1.0, 0.0, 0.0, 0.0);
  auto spec = small_spec(8, 8, 31);
  spec.depth_max = 1e-1;
  const auto mono = hn::check_localization(ball(), n, -0.4, spec, 0.15, true);
  CHECK(mono.theorem_id == "inclusion_monotone");
  CHECK(mono.status == hn::CheckStatus::passed);
  CHECK(mono.holdout_violations == 0);

  const auto full = hn::check_localization(ball(), n, -0.4, spec, 0.15, false);
  CHECK(full.theorem_id == "localization");
  CHECK(full.status == hn::CheckStatus::passed);
  CHECK(full.constant("C_add") >= 0.0);
  CHECK(full.constant("C_ratio") >= 0.0);
}

TEST_CASE("upper bound constant clamps at the lemma floor") {
  auto spec = small_spec(10, 10, 37);
  const auto rep = hn::check_up(ball(), spec);
  CHECK(rep.status == hn::CheckStatus::passed);
  CHECK(rep.constant("A") >= hn::kUpFloor);
  CHECK(rep.holdout_violations == 0);
}

TEST_CASE("fitted constants are monotone under calibration growth") {
  auto narrow = small_spec(8, 12, 43);
  auto wide = small_spec(16, 4, 43);
  // same seed and same total draw count: the wide calibration is a superset
  const auto a = hn::check_up(ball(), narrow);
  const auto b = hn::check_up(ball(), wide);
  CHECK(b.constant("A") >= a.constant("A"));
}

TEST_CASE("nk bounds check wraps the metric comparison") {
  auto spec = small_spec(40, 40, 47);
  const auto rep = hn::check_nk(egg2_catlin(), spec);
  CHECK(rep.theorem_id == "nk_bounds");
  CHECK(rep.constant("C") > 0.0);
  CHECK(rep.calibration_count == 40);
  CHECK(rep.status == hn::CheckStatus::passed);
}

TEST_CASE("suite driver runs sections, reports config errors, and renders") {
  const std::string path = write_temp_suite(
      "harness_suite_test.tmp",
      "# tiny smoke suite\n"
      "[up_upper]\n"
      "domain = ball\n"
      "calibration = 6\n"
      "holdout = 6\n"
      "depth_min = 1e-3\n"
      "depth_max = 1e-1\n"
      "seed = 5\n"
      "[nk_bounds]\n"
      "domain = egg:2\n"
      "metric = catlin\n"
      "calibration = 40\n"
      "holdout = 40\n"
      "tolerance = 2\n"  // the count reading of the pass rule
      "seed = 47\n"
      "[no_such_check]\n"
      "domain = ball\n");
  const auto result = hn::run_suite(path);
  REQUIRE(result.reports.size() == 3);
  CHECK(result.reports[0].theorem_id == "up_upper");
  CHECK(result.reports[0].status == hn::CheckStatus::passed);
  CHECK(result.reports[1].status == hn::CheckStatus::passed);
  CHECK(result.reports[2].theorem_id == "no_such_check");
  CHECK(result.reports[2].status == hn::CheckStatus::failed);
  CHECK(result.reports[2].note.find("configuration error") !=
        std::string::npos);
  CHECK(!result.all_passed);

  // bitwise determinism of the whole run, visible through the csv rendering
  const auto rerun = hn::run_suite(path);
  CHECK(hn::render_csv(result.reports) == hn::render_csv(rerun.reports));

  const auto csv = hn::render_csv(result.reports, "2026-01-01T00:00:00Z");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "#finsler-lab-v1");
  std::getline(lines, line);
  CHECK(line ==
        "theorem_id,constant_name,fitted_value,holdout_violations,"
        "worst_margin,pass,timestamp");
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    CHECK(line.rfind(",2026-01-01T00:00:00Z") == line.size() - 21);
  }
  CHECK(rows >= 3);

  const auto text = hn::render_text(result.reports);
  CHECK(text.find("[PASS] up_upper") != std::string::npos);
  CHECK(text.find("[FAIL] no_such_check") != std::string::npos);
  CHECK(text.find("1 failed") != std::string::npos);

  std::remove(path.c_str());
  CHECK_THROWS_AS(hn::run_suite(path), Error);
  const std::string bad = write_temp_suite("harness_suite_bad.tmp",
                                           "stray = line\n[ok]\n");
  CHECK_THROWS_AS(hn::run_suite(bad), Error);
  std::remove(bad.c_str());
}
