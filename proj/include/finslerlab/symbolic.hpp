#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <vector>

#include "finslerlab/errors.hpp"
#include "finslerlab/geometry.hpp"

// Exact polynomial calculus in the four formal variables z1, conj(z1), z2,
// conj(z2). Defining functions, their Wirtinger derivatives and the iterated
// tangential-field coefficients are all manipulated here without numerical
// differentiation; rounding only enters through the double coefficients.

namespace finsler::sym {

enum Var : int { v_z1 = 0, v_z1b = 1, v_z2 = 2, v_z2b = 3 };

using Exponents = std::array<std::uint8_t, 4>;

struct Monomial {
  Exponents e{0, 0, 0, 0};
  cplx c{0.0, 0.0};

  int degree() const { return int(e[0]) + int(e[1]) + int(e[2]) + int(e[3]); }
};

// Term tuple for building polynomials by hand: z1^a conj(z1)^b z2^c conj(z2)^d.
struct Term {
  int a, b, c, d;
  cplx coeff;
};

class Poly {
 public:
  // Anything past this total degree is treated as an expression-size failure
  // rather than silently chewing memory.
  static constexpr int kDegreeCap = 64;

  Poly() = default;
  explicit Poly(cplx constant);
  Poly(std::initializer_list<Term> terms);
  static Poly variable(Var v);
  static Poly from_terms(const std::vector<Term>& terms);

  const std::vector<Monomial>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const { return terms_.empty() || (terms_.size() == 1 && terms_[0].degree() == 0); }
  cplx constant_value() const;
  int total_degree() const;
  std::size_t term_count() const { return terms_.size(); }
  double max_abs_coeff() const;

  Poly operator+(const Poly& o) const;
  Poly operator-(const Poly& o) const;
  Poly operator*(const Poly& o) const;
  Poly operator*(cplx s) const;
  Poly operator-() const;
  Poly& operator+=(const Poly& o);

  Poly wirtinger(Var v) const;
  // Structural conjugation: swaps barred and unbarred exponents and
  // conjugates every coefficient.
  Poly conjugate() const;
  // True when conjugate() reproduces the polynomial within `tol` on
  // coefficients, i.e. the polynomial is a real-valued function.
  bool is_conjugate_symmetric(double tol = 1e-12) const;

  // Substitute z = M w (2x2 complex matrix acting on (z1, z2)); barred
  // variables get the conjugated substitution. Exact, degree preserved.
  Poly substitute_linear(const std::array<cplx, 4>& m) const;

  // Divide out the largest monomial dividing every term. Returns the factor.
  Exponents extract_monomial_content();

  cplx eval(const C2& z) const;
  cplx eval(const std::array<cplx, 4>& vals) const;

  bool near_equal(const Poly& o, double tol) const;

 private:
  void normalize();
  std::vector<Monomial> terms_;  // sorted lexicographically by exponents, merged, zero-free
};

Poly pow(const Poly& p, int n);

struct RationalExpr {
  Poly num;
  Poly den{cplx(1.0, 0.0)};

  RationalExpr() = default;
  RationalExpr(Poly n, Poly d);

  RationalExpr operator+(const RationalExpr& o) const;
  RationalExpr operator-(const RationalExpr& o) const;
  RationalExpr operator*(const RationalExpr& o) const;
  RationalExpr conjugate() const;
  RationalExpr wirtinger(Var v) const;

  // Scalar-content normalization of the denominator plus cancellation of any
  // common monomial factor. No full polynomial gcd.
  void reduce();

  // Throws pole_proximity when the denominator lands within 1e-12 (relative
  // to its coefficient scale) of zero.
  cplx eval(const C2& z) const;
};

// Coefficient of the complex Hessian form applied to the special tangential
// frame field (1, -s) with s = (dr/dz2)^{-1} dr/dz1. Denominator is
// (dr/dz2) * conj(dr/dz2).
RationalExpr levi_form_coeff(const Poly& r);

enum class IteratedOrder {
  l1_outermost,        // default: conjugate-field powers applied first, plain-field powers last
  conjugate_outermost  // debug: swapped application order
};

// Iterated coefficient: (j-1) plain-field and (k-1) conjugate-field
// applications on top of levi_form_coeff. j, k >= 1.
RationalExpr iterated_l_coeff(const Poly& r, int j, int k,
                              IteratedOrder order = IteratedOrder::l1_outermost);

}  // namespace finsler::sym
