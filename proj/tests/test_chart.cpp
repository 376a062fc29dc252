#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <chrono>

#include "doctest.h"
#include "finslerlab/chart.hpp"
#include "finslerlab/errors.hpp"
#include "finslerlab/rng.hpp"

using namespace finsler;
namespace ch = finsler::chart;

namespace {

sym::Poly egg_poly(int k) {
  return sym::Poly({{uint8_t(k), uint8_t(k), 0, 0, 1.0}, {0, 0, 1, 1, 1.0}, {0, 0, 0, 0, -1.0}});
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace

TEST_CASE("rotation maps the normal to (0,i) and the tangent to (1,0)") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    C2 n = rng.unit_c2();
    auto u = ch::rotation_to_normal(n);
    C2 img = ch::apply(u, n);
    CHECK(std::abs(img.z1) < 1e-12);
    CHECK(std::abs(img.z2 - cplx(0.0, 1.0)) < 1e-12);
    C2 h(-std::conj(n.z2), std::conj(n.z1));
    C2 img_h = ch::apply(u, h);
    CHECK(std::abs(img_h.z1 - 1.0) < 1e-12);
    CHECK(std::abs(img_h.z2) < 1e-12);
    // unitarity: adjoint inverts
    C2 back = ch::apply(ch::adjoint(u), img);
    CHECK(dist(back, n) < 1e-12);
  }
}

TEST_CASE("substituted polynomial matches r composed with the rotation") {
  Rng rng(11);
  sym::Poly r = egg_poly(2);
  for (int trial = 0; trial < 10; ++trial) {
    auto u = ch::rotation_to_normal(rng.unit_c2());
    sym::Poly rot = r.substitute_linear(ch::adjoint(u));
    for (int pt = 0; pt < 5; ++pt) {
      C2 z = rng.gaussian_c2();
      cplx direct = r.eval(z);
      cplx via = rot.eval(ch::apply(u, z));
      CHECK(std::abs(direct - via) < 1e-10 * (1.0 + std::abs(direct)));
    }
  }
}

TEST_CASE("tape evaluation agrees with expanded rationals and the standalone recursion") {
  Rng rng(23);
  sym::Poly r = egg_poly(2);
  auto u = ch::rotation_to_normal(rng.unit_c2());
  sym::Poly rot = r.substitute_linear(ch::adjoint(u));
  ch::CoeffEngine engine(rot, 4, sym::IteratedOrder::l1_outermost);

  // standalone recursion, built once per (j,k)
  std::map<std::pair<int, int>, sym::RationalExpr> direct;
  for (int l = 2; l <= 4; ++l)
    for (auto [j, k] : ch::CoeffEngine::jk_pairs(l))
      direct.emplace(std::make_pair(j, k),
                     sym::iterated_l_coeff(rot, j, k, sym::IteratedOrder::l1_outermost));

  int checked = 0;
  for (int pt = 0; pt < 40 && checked < 12; ++pt) {
    C2 w = rng.gaussian_c2();
    ch::CoeffEngine::PointValues pv;
    try {
      pv = engine.eval(w);
    } catch (const Error&) {
      continue;  // too close to the frame pole, skip
    }
    ++checked;
    for (int l = 2; l <= 4; ++l) {
      const auto& exprs = engine.expanded_level(l);
      auto pairs = ch::CoeffEngine::jk_pairs(l);
      REQUIRE(exprs.size() == pairs.size());
      double level_max = 0.0;
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto [j, k] = pairs[i];
        cplx from_expanded = exprs[i].eval(w);
        cplx standalone = direct.at({j, k}).eval(w);
        CHECK(std::abs(from_expanded - standalone) <
              1e-8 * std::max(1.0, std::abs(standalone)));
        level_max = std::max(level_max, std::abs(standalone));
      }
      CHECK(rel_err(pv.c[l], level_max) < 1e-8);
    }
  }
  REQUIRE(checked >= 8);
}

TEST_CASE("chart frame at the egg pole reports the expected invariants") {
  sym::Poly r = egg_poly(2);
  C2 pole(0.0, 1.0);
  C2 normal(0.0, 1.0);  // conj of the Wirtinger gradient direction at the pole
  ch::ChartFrame f = ch::build_chart_frame(r, pole, normal, 4);
  CHECK(f.radius > 0.01);
  auto pv = f.engine->eval(f.to_chart(pole));
  CHECK(pv.c[2] < 1e-10);
  CHECK(pv.c[3] < 1e-10);
  CHECK(rel_err(pv.c[4], 4.0) < 1e-9);
  CHECK(rel_err(pv.frame_ratio, 0.5) < 1e-9);  // tangential gradient vanishes at the pole

  // r in chart coordinates vanishes at the image of the pole
  CHECK(std::abs(f.engine->eval_r(f.to_chart(pole))) < 1e-12);
}

TEST_CASE("engine rejects a defining function with identically vanishing dr/dz2") {
  sym::Poly r({{1, 1, 0, 0, 1.0}, {0, 0, 0, 0, -1.0}});  // |z1|^2 - 1
  CHECK_THROWS_WITH_AS(ch::CoeffEngine(r, 2, sym::IteratedOrder::l1_outermost),
                       doctest::Contains("identically zero"), Error);
}

TEST_CASE("tape evaluation stays fast enough for inner loops") {
  Rng rng(5);
  auto u = ch::rotation_to_normal(rng.unit_c2());
  sym::Poly rot = egg_poly(2).substitute_linear(ch::adjoint(u));
  ch::CoeffEngine engine(rot, 4, sym::IteratedOrder::l1_outermost);
  // warm up, then time a batch
  double sink = 0.0;
  C2 w(0.3, 0.9);
  for (int i = 0; i < 100; ++i) sink += engine.eval(w).c[4];
  auto t0 = std::chrono::steady_clock::now();
  const int n = 2000;
  for (int i = 0; i < n; ++i) sink += engine.eval(w).c[4];
  auto t1 = std::chrono::steady_clock::now();
  double us = std::chrono::duration<double, std::micro>(t1 - t0).count() / n;
  MESSAGE("tape eval: ", us, " us per point");
  CHECK(us < 100.0);
  CHECK(sink > 0.0);
}
