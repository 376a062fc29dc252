#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "finslerlab/rng.hpp"
#include "finslerlab/symbolic.hpp"

using namespace finsler;
using namespace finsler::sym;

namespace {

// |z1|^(2k) + |z2|^2 - 1
Poly egg_poly(int k) {
  return Poly{{k, k, 0, 0, cplx(1.0, 0.0)},
              {0, 0, 1, 1, cplx(1.0, 0.0)},
              {0, 0, 0, 0, cplx(-1.0, 0.0)}};
}

// Slow per-monomial evaluation, the oracle for the Horner scheme.
cplx naive_eval(const Poly& p, const C2& z) {
  std::array<cplx, 4> vals = {z.z1, std::conj(z.z1), z.z2, std::conj(z.z2)};
  cplx acc(0.0, 0.0);
  for (const Monomial& m : p.terms()) {
    cplx t = m.c;
    for (int i = 0; i < 4; ++i)
      for (int rep = 0; rep < m.e[i]; ++rep) t *= vals[i];
    acc += t;
  }
  return acc;
}

Poly random_poly(Rng& rng, int max_terms, int max_deg_per_var) {
  std::vector<Term> terms;
  int n = 1 + int(rng.below(std::size_t(max_terms)));
  for (int i = 0; i < n; ++i) {
    terms.push_back(Term{int(rng.below(std::size_t(max_deg_per_var + 1))),
                         int(rng.below(std::size_t(max_deg_per_var + 1))),
                         int(rng.below(std::size_t(max_deg_per_var + 1))),
                         int(rng.below(std::size_t(max_deg_per_var + 1))),
                         cplx(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0))});
  }
  return Poly::from_terms(terms);
}

C2 random_point(Rng& rng, double scale = 1.0) {
  return C2(rng.uniform(-scale, scale), rng.uniform(-scale, scale), rng.uniform(-scale, scale),
            rng.uniform(-scale, scale));
}

}  // namespace

TEST_CASE("wirtinger derivatives of simple polynomials") {
  Poly ball = egg_poly(1);
  Poly d1 = ball.wirtinger(v_z1);
  CHECK(d1.near_equal(Poly::variable(v_z1b), 1e-15));  // d/dz1 (z1 conj(z1)) = conj(z1)

  Poly p{{2, 0, 0, 1, cplx(1.0, 0.0)}};  // z1^2 conj(z2)
  CHECK(p.wirtinger(v_z2).is_zero());
  CHECK(p.wirtinger(v_z2b).near_equal(Poly{{2, 0, 0, 0, cplx(1.0, 0.0)}}, 1e-15));
}

TEST_CASE("derivation rules hold structurally") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    Poly f = random_poly(rng, 6, 3);
    Poly g = random_poly(rng, 6, 3);
    for (Var v : {v_z1, v_z1b, v_z2, v_z2b}) {
      Poly lhs = (f * g).wirtinger(v);
      Poly rhs = f.wirtinger(v) * g + f * g.wirtinger(v);
      CHECK(lhs.near_equal(rhs, 1e-12));
    }
    // mixed partials commute
    Poly ab = f.wirtinger(v_z1).wirtinger(v_z2b);
    Poly ba = f.wirtinger(v_z2b).wirtinger(v_z1);
    CHECK(ab.near_equal(ba, 1e-12));
  }
}

TEST_CASE("structural conjugation") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Poly f = random_poly(rng, 8, 3);
    CHECK(f.conjugate().conjugate().near_equal(f, 1e-15));
    for (int pt = 0; pt < 5; ++pt) {
      C2 z = random_point(rng);
      cplx a = f.conjugate().eval(z);
      cplx b = std::conj(f.eval(z));
      CHECK(std::abs(a - b) < 1e-10 * (1.0 + std::abs(b)));
    }
    // conjugation commutes with the barred derivative
    CHECK(f.wirtinger(v_z1).conjugate().near_equal(f.conjugate().wirtinger(v_z1b), 1e-12));
  }
  CHECK(egg_poly(2).is_conjugate_symmetric());
  Poly asym{{1, 0, 0, 0, cplx(1.0, 0.0)}};
  CHECK(!asym.is_conjugate_symmetric());
}

TEST_CASE("evaluation matches the per-monomial oracle") {
  Rng rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    Poly f = random_poly(rng, 12, 5);
    for (int pt = 0; pt < 6; ++pt) {
      C2 z = random_point(rng, 1.3);
      cplx a = f.eval(z);
      cplx b = naive_eval(f, z);
      CHECK(std::abs(a - b) <= 1e-11 * (1.0 + std::abs(b)));
    }
  }
}

TEST_CASE("linear substitution is exact and composes with evaluation") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Poly f = random_poly(rng, 8, 3);
    std::array<cplx, 4> m = {cplx(rng.normal(), rng.normal()), cplx(rng.normal(), rng.normal()),
                             cplx(rng.normal(), rng.normal()), cplx(rng.normal(), rng.normal())};
    Poly g = f.substitute_linear(m);
    CHECK(g.total_degree() <= f.total_degree());
    for (int pt = 0; pt < 5; ++pt) {
      C2 w = random_point(rng);
      C2 mw(m[0] * w.z1 + m[1] * w.z2, m[2] * w.z1 + m[3] * w.z2);
      cplx a = g.eval(w);
      cplx b = f.eval(mw);
      CHECK(std::abs(a - b) < 1e-9 * (1.0 + std::abs(b)));
    }
  }
}

TEST_CASE("levi coefficient on the ball") {
  Poly ball = egg_poly(1);
  RationalExpr levi = levi_form_coeff(ball);
  CHECK(levi.eval(C2(0.0, 0.0, 1.0, 0.0)).real() == doctest::Approx(1.0).epsilon(1e-12));
  // closed form 1 + |z1/z2|^2 anywhere dr/dz2 != 0
  Rng rng(3);
  for (int i = 0; i < 25; ++i) {
    C2 z = random_point(rng);
    if (std::abs(z.z2) < 0.2) continue;
    double expect = 1.0 + std::norm(z.z1) / std::norm(z.z2);
    cplx got = levi.eval(z);
    CHECK(got.real() == doctest::Approx(expect).epsilon(1e-9));
    CHECK(std::abs(got.imag()) < 1e-9 * expect);
  }
}

TEST_CASE("levi coefficient on the quartic egg") {
  Poly egg = egg_poly(2);
  RationalExpr levi = levi_form_coeff(egg);
  CHECK(std::abs(levi.eval(C2(0.0, 0.0, 1.0, 0.0))) < 1e-14);
  // at z1 = 0.5 on the boundary: 4|z1|^2 + 4|z1|^6/|z2|^2 = 1 + 1/15
  double w = std::sqrt(1.0 - 0.0625);
  cplx got = levi.eval(C2(cplx(0.5, 0.0), cplx(w, 0.0)));
  CHECK(got.real() == doctest::Approx(16.0 / 15.0).epsilon(1e-12));
  CHECK(std::abs(got.imag()) < 1e-12);
}

TEST_CASE("iterated coefficients detect the contact order of model eggs") {
  // C_{2k}(pole) = (k!)^2 and everything below vanishes
  const double factorials[] = {1.0, 1.0, 2.0, 6.0};
  for (int k = 1; k <= 3; ++k) {
    Poly egg = egg_poly(k);
    C2 pole(0.0, 0.0, 1.0, 0.0);
    double expect = factorials[k] * factorials[k];
    for (int l = 2; l <= 2 * k; ++l) {
      double cl = 0.0;
      for (int j = 1; j < l; ++j) {
        int kk = l - j;
        cl = std::max(cl, std::abs(iterated_l_coeff(egg, j, kk).eval(pole)));
      }
      if (l < 2 * k) {
        CHECK(cl < 1e-12);
      } else {
        CHECK(cl == doctest::Approx(expect).epsilon(1e-10));
      }
    }
  }
  // individual entries at the pole of the quartic egg
  Poly egg2 = egg_poly(2);
  C2 pole(0.0, 0.0, 1.0, 0.0);
  CHECK(std::abs(iterated_l_coeff(egg2, 2, 2).eval(pole) - cplx(4.0, 0.0)) < 1e-12);
  CHECK(std::abs(iterated_l_coeff(egg2, 2, 1).eval(pole)) < 1e-12);
  CHECK(std::abs(iterated_l_coeff(egg2, 1, 2).eval(pole)) < 1e-12);
}

TEST_CASE("application order flag changes the entry but not the level maxima") {
  // For a real defining function the swapped-order family is the conjugated,
  // index-exchanged family, so the per-level maxima must coincide.
  Rng rng(11);
  Poly egg = egg_poly(2);
  for (int trial = 0; trial < 3; ++trial) {
    // random unitary-ish matrix (normalized Gaussian columns + orthogonalization)
    cplx a(rng.normal(), rng.normal()), b(rng.normal(), rng.normal());
    double na = std::sqrt(std::norm(a) + std::norm(b));
    a /= na;
    b /= na;
    std::array<cplx, 4> u = {a, -std::conj(b), b, std::conj(a)};
    Poly rot = egg.substitute_linear(u);
    REQUIRE(rot.is_conjugate_symmetric(1e-12));
    C2 z(0.31, -0.2, 0.7, 0.1);
    for (int l = 2; l <= 4; ++l) {
      double c_default = 0.0, c_swapped = 0.0;
      for (int j = 1; j < l; ++j) {
        int k = l - j;
        c_default = std::max(
            c_default, std::abs(iterated_l_coeff(rot, j, k, IteratedOrder::l1_outermost).eval(z)));
        c_swapped = std::max(c_swapped, std::abs(iterated_l_coeff(
                                            rot, j, k, IteratedOrder::conjugate_outermost).eval(z)));
      }
      CHECK(c_default == doctest::Approx(c_swapped).epsilon(1e-9));
    }
  }
}

TEST_CASE("rational quotient rule is structurally exact") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    Poly n = random_poly(rng, 5, 2);
    Poly d = random_poly(rng, 3, 1) + Poly(cplx(2.0, 0.0));  // keep it away from zero
    RationalExpr f(n, d);
    for (Var v : {v_z1, v_z2b}) {
      RationalExpr df = f.wirtinger(v);
      // compare against the quotient rule at sample points
      for (int pt = 0; pt < 4; ++pt) {
        C2 z = random_point(rng, 0.6);
        cplx dv = d.eval(z);
        if (std::abs(dv) < 0.5) continue;
        cplx expect = (n.wirtinger(v).eval(z) * dv - n.eval(z) * d.wirtinger(v).eval(z)) / (dv * dv);
        cplx got = df.eval(z);
        CHECK(std::abs(got - expect) < 1e-8 * (1.0 + std::abs(expect)));
      }
    }
  }
}

TEST_CASE("degree cap and pole proximity are reported as typed errors") {
  Poly big{{40, 0, 0, 0, cplx(1.0, 0.0)}};
  Poly also_big{{30, 0, 0, 0, cplx(1.0, 0.0)}};
  CHECK_THROWS_AS(big * also_big, Error);
  try {
    big* also_big;
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::expression_too_large);
  }
  CHECK_THROWS_AS(Poly::from_terms({{70, 0, 0, 0, cplx(1.0, 0.0)}}), Error);

  RationalExpr inv(Poly(cplx(1.0, 0.0)), Poly::variable(v_z2b));
  CHECK_THROWS_AS(inv.eval(C2(0.0, 0.0, 1e-13, 0.0)), Error);
  try {
    inv.eval(C2(0.0, 0.0, 1e-13, 0.0));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::pole_proximity);
  }
}

TEST_CASE("content reduction keeps values and trims monomial factors") {
  // z1 z2 / (z2 conj(z2)) reduces to z1 / conj(z2)
  Poly n{{1, 0, 1, 0, cplx(3.0, 0.0)}};
  Poly d{{0, 0, 1, 1, cplx(3.0, 0.0)}};
  RationalExpr f(n, d);
  CHECK(f.den.total_degree() == 1);
  C2 z(0.4, 0.1, 0.8, -0.3);
  cplx expect = 3.0 * z.z1 * z.z2 / (3.0 * z.z2 * std::conj(z.z2));
  CHECK(std::abs(f.eval(z) - expect) < 1e-12);
}
