#include "finslerlab/symbolic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace finsler::sym {

namespace {

bool exp_less(const Exponents& a, const Exponents& b) {
  for (int i = 0; i < 4; ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return false;
}

cplx pow_c(cplx base, int n) {
  cplx acc(1.0, 0.0);
  while (n > 0) {
    if (n & 1) acc *= base;
    base *= base;
    n >>= 1;
  }
  return acc;
}

void check_degree_for_product(const Poly& a, const Poly& b) {
  if (a.is_zero() || b.is_zero()) return;
  if (a.total_degree() + b.total_degree() > Poly::kDegreeCap) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "expression too large: product degree %d exceeds cap %d",
                  a.total_degree() + b.total_degree(), Poly::kDegreeCap);
    fail(ErrorCode::expression_too_large, buf);
  }
}

// Composite-Horner evaluation: group on one variable at a time, combine the
// groups with a Horner ladder in that variable.
cplx eval_rec(const Monomial* t, std::size_t n, int var, const std::array<cplx, 4>& vals) {
  if (n == 0) return {0.0, 0.0};
  if (var == 4) return t[0].c;  // exponent tuples are unique after merging

  struct Group {
    int exp;
    cplx val;
  };
  Group groups[Poly::kDegreeCap + 1];
  int ng = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && t[j].e[var] == t[i].e[var]) ++j;
    groups[ng++] = {int(t[i].e[var]), eval_rec(t + i, j - i, var + 1, vals)};
    i = j;
  }
  // groups are in ascending exponent order; run Horner from the top down
  cplx acc = groups[ng - 1].val;
  for (int g = ng - 2; g >= 0; --g) {
    acc = acc * pow_c(vals[var], groups[g + 1].exp - groups[g].exp) + groups[g].val;
  }
  return acc * pow_c(vals[var], groups[0].exp);
}

}  // namespace

Poly::Poly(cplx constant) {
  if (constant != cplx(0.0, 0.0)) terms_.push_back(Monomial{{0, 0, 0, 0}, constant});
}

Poly::Poly(std::initializer_list<Term> terms) {
  for (const Term& t : terms) {
    Monomial m;
    m.e = {std::uint8_t(t.a), std::uint8_t(t.b), std::uint8_t(t.c), std::uint8_t(t.d)};
    m.c = t.coeff;
    terms_.push_back(m);
  }
  normalize();
}

Poly Poly::variable(Var v) {
  Poly p;
  Monomial m;
  m.e[int(v)] = 1;
  m.c = cplx(1.0, 0.0);
  p.terms_.push_back(m);
  return p;
}

Poly Poly::from_terms(const std::vector<Term>& terms) {
  Poly p;
  for (const Term& t : terms) {
    if (t.a < 0 || t.b < 0 || t.c < 0 || t.d < 0)
      fail(ErrorCode::invalid_argument, "negative exponent in polynomial term");
    if (t.a + t.b + t.c + t.d > kDegreeCap)
      fail(ErrorCode::expression_too_large, "expression too large: term degree exceeds cap");
    Monomial m;
    m.e = {std::uint8_t(t.a), std::uint8_t(t.b), std::uint8_t(t.c), std::uint8_t(t.d)};
    m.c = t.coeff;
    p.terms_.push_back(m);
  }
  p.normalize();
  return p;
}

void Poly::normalize() {
  std::sort(terms_.begin(), terms_.end(),
            [](const Monomial& a, const Monomial& b) { return exp_less(a.e, b.e); });
  std::vector<Monomial> merged;
  merged.reserve(terms_.size());
  for (const Monomial& m : terms_) {
    if (!merged.empty() && merged.back().e == m.e) {
      merged.back().c += m.c;
    } else {
      merged.push_back(m);
    }
  }
  merged.erase(std::remove_if(merged.begin(), merged.end(),
                              [](const Monomial& m) { return m.c == cplx(0.0, 0.0); }),
               merged.end());
  terms_ = std::move(merged);
}

cplx Poly::constant_value() const {
  if (terms_.empty()) return {0.0, 0.0};
  return terms_[0].degree() == 0 ? terms_[0].c : cplx(0.0, 0.0);
}

int Poly::total_degree() const {
  int d = 0;
  for (const Monomial& m : terms_) d = std::max(d, m.degree());
  return d;
}

double Poly::max_abs_coeff() const {
  double m = 0.0;
  for (const Monomial& t : terms_) m = std::max(m, std::abs(t.c));
  return m;
}

Poly Poly::operator+(const Poly& o) const {
  Poly out;
  out.terms_ = terms_;
  out.terms_.insert(out.terms_.end(), o.terms_.begin(), o.terms_.end());
  out.normalize();
  return out;
}

Poly Poly::operator-(const Poly& o) const { return *this + (-o); }

Poly Poly::operator-() const {
  Poly out = *this;
  for (Monomial& m : out.terms_) m.c = -m.c;
  return out;
}

Poly& Poly::operator+=(const Poly& o) {
  *this = *this + o;
  return *this;
}

Poly Poly::operator*(const Poly& o) const {
  check_degree_for_product(*this, o);
  Poly out;
  out.terms_.reserve(terms_.size() * o.terms_.size());
  for (const Monomial& a : terms_) {
    for (const Monomial& b : o.terms_) {
      Monomial m;
      for (int i = 0; i < 4; ++i) m.e[i] = std::uint8_t(a.e[i] + b.e[i]);
      m.c = a.c * b.c;
      out.terms_.push_back(m);
    }
  }
  out.normalize();
  return out;
}

Poly Poly::operator*(cplx s) const {
  if (s == cplx(0.0, 0.0)) return Poly();
  Poly out = *this;
  for (Monomial& m : out.terms_) m.c *= s;
  return out;
}

Poly Poly::wirtinger(Var v) const {
  Poly out;
  out.terms_.reserve(terms_.size());
  for (const Monomial& m : terms_) {
    if (m.e[int(v)] == 0) continue;
    Monomial d = m;
    d.c *= double(d.e[int(v)]);
    d.e[int(v)] -= 1;
    out.terms_.push_back(d);
  }
  out.normalize();
  return out;
}

Poly Poly::conjugate() const {
  Poly out;
  out.terms_.reserve(terms_.size());
  for (const Monomial& m : terms_) {
    Monomial c;
    c.e = {m.e[1], m.e[0], m.e[3], m.e[2]};
    c.c = std::conj(m.c);
    out.terms_.push_back(c);
  }
  out.normalize();
  return out;
}

bool Poly::is_conjugate_symmetric(double tol) const { return near_equal(conjugate(), tol); }

bool Poly::near_equal(const Poly& o, double tol) const {
  double scale = std::max({1.0, max_abs_coeff(), o.max_abs_coeff()});
  Poly diff = *this - o;
  return diff.max_abs_coeff() <= tol * scale;
}

Poly Poly::substitute_linear(const std::array<cplx, 4>& m) const {
  // z1 -> m0 w1 + m1 w2, z2 -> m2 w1 + m3 w2, barred variables conjugated.
  const Poly w1 = Poly::variable(v_z1), w2 = Poly::variable(v_z2);
  const Poly w1b = Poly::variable(v_z1b), w2b = Poly::variable(v_z2b);
  std::array<Poly, 4> forms = {
      w1 * m[0] + w2 * m[1],
      w1b * std::conj(m[0]) + w2b * std::conj(m[1]),
      w1 * m[2] + w2 * m[3],
      w1b * std::conj(m[2]) + w2b * std::conj(m[3]),
  };
  // cache powers of each form up to the max exponent appearing
  std::array<std::vector<Poly>, 4> powers;
  std::array<int, 4> max_e = {0, 0, 0, 0};
  for (const Monomial& t : terms_)
    for (int i = 0; i < 4; ++i) max_e[i] = std::max(max_e[i], int(t.e[i]));
  for (int i = 0; i < 4; ++i) {
    powers[i].push_back(Poly(cplx(1.0, 0.0)));
    for (int k = 1; k <= max_e[i]; ++k) powers[i].push_back(powers[i][k - 1] * forms[i]);
  }
  Poly out;
  for (const Monomial& t : terms_) {
    Poly term = powers[0][t.e[0]] * powers[1][t.e[1]] * powers[2][t.e[2]] * powers[3][t.e[3]];
    out += term * t.c;
  }
  return out;
}

Exponents Poly::extract_monomial_content() {
  Exponents g = {0, 0, 0, 0};
  if (terms_.empty()) return g;
  g = terms_[0].e;
  for (const Monomial& m : terms_)
    for (int i = 0; i < 4; ++i) g[i] = std::min(g[i], m.e[i]);
  if (g != Exponents{0, 0, 0, 0}) {
    for (Monomial& m : terms_)
      for (int i = 0; i < 4; ++i) m.e[i] = std::uint8_t(m.e[i] - g[i]);
  }
  return g;
}

cplx Poly::eval(const C2& z) const {
  return eval({z.z1, std::conj(z.z1), z.z2, std::conj(z.z2)});
}

cplx Poly::eval(const std::array<cplx, 4>& vals) const {
  return eval_rec(terms_.data(), terms_.size(), 0, vals);
}

Poly pow(const Poly& p, int n) {
  if (n < 0) fail(ErrorCode::invalid_argument, "negative polynomial power");
  Poly acc(cplx(1.0, 0.0));
  for (int i = 0; i < n; ++i) acc = acc * p;
  return acc;
}

// ---- rational expressions ----

RationalExpr::RationalExpr(Poly n, Poly d) : num(std::move(n)), den(std::move(d)) {
  if (den.is_zero()) fail(ErrorCode::invalid_argument, "rational expression with zero denominator");
  reduce();
}

RationalExpr RationalExpr::operator+(const RationalExpr& o) const {
  return RationalExpr(num * o.den + o.num * den, den * o.den);
}

RationalExpr RationalExpr::operator-(const RationalExpr& o) const {
  return RationalExpr(num * o.den - o.num * den, den * o.den);
}

RationalExpr RationalExpr::operator*(const RationalExpr& o) const {
  return RationalExpr(num * o.num, den * o.den);
}

RationalExpr RationalExpr::conjugate() const {
  RationalExpr out;
  out.num = num.conjugate();
  out.den = den.conjugate();
  out.reduce();
  return out;
}

RationalExpr RationalExpr::wirtinger(Var v) const {
  return RationalExpr(num.wirtinger(v) * den - num * den.wirtinger(v), den * den);
}

void RationalExpr::reduce() {
  if (num.is_zero()) {
    den = Poly(cplx(1.0, 0.0));
    return;
  }
  // cancel the common monomial factor
  Poly n = num, d = den;
  Exponents gn = n.extract_monomial_content();
  Exponents gd = d.extract_monomial_content();
  Exponents common, rn, rd;
  for (int i = 0; i < 4; ++i) {
    common[i] = std::min(gn[i], gd[i]);
    rn[i] = std::uint8_t(gn[i] - common[i]);
    rd[i] = std::uint8_t(gd[i] - common[i]);
  }
  auto reapply = [](Poly& p, const Exponents& g) {
    if (g == Exponents{0, 0, 0, 0}) return;
    Poly m;
    std::vector<Term> t = {{g[0], g[1], g[2], g[3], cplx(1.0, 0.0)}};
    p = p * Poly::from_terms(t);
  };
  reapply(n, rn);
  reapply(d, rd);
  // scalar content: keep the denominator's leading scale near 1
  double scale = d.max_abs_coeff();
  if (scale > 0.0 && (scale > 4.0 || scale < 0.25)) {
    n = n * cplx(1.0 / scale, 0.0);
    d = d * cplx(1.0 / scale, 0.0);
  }
  num = std::move(n);
  den = std::move(d);
}

cplx RationalExpr::eval(const C2& z) const {
  cplx dv = den.eval(z);
  double scale = std::max(1.0, den.max_abs_coeff());
  if (std::abs(dv) < 1e-12 * scale)
    fail(ErrorCode::pole_proximity, "pole proximity: denominator vanishes at evaluation point");
  return num.eval(z) / dv;
}

// ---- frame-field coefficients ----

namespace {

struct FrameCtx {
  Poly P, Pc, R, Rc;  // dr/dz1, its conjugate, dr/dz2, its conjugate
};

// Intermediates kept as num / (R^p Rc^q); keeps quotient-rule growth linear
// in the number of field applications instead of doubling the denominator.
struct Factored {
  Poly num;
  int p = 0, q = 0;
};

Factored quotient_deriv(const Factored& f, Var v, const FrameCtx& c) {
  Poly dn = f.num.wirtinger(v);
  Poly dR = c.R.wirtinger(v);
  Poly dRc = c.Rc.wirtinger(v);
  Poly out = dn * c.R * c.Rc -
             f.num * (dR * c.Rc * cplx(double(f.p), 0.0) + c.R * dRc * cplx(double(f.q), 0.0));
  return {std::move(out), f.p + 1, f.q + 1};
}

Factored apply_plain_field(const Factored& f, const FrameCtx& c) {
  Factored d1 = quotient_deriv(f, v_z1, c);
  Factored d2 = quotient_deriv(f, v_z2, c);
  return {d1.num * c.R - c.P * d2.num, f.p + 2, f.q + 1};
}

Factored apply_conjugate_field(const Factored& f, const FrameCtx& c) {
  Factored d1 = quotient_deriv(f, v_z1b, c);
  Factored d2 = quotient_deriv(f, v_z2b, c);
  return {d1.num * c.Rc - c.Pc * d2.num, f.p + 1, f.q + 2};
}

FrameCtx make_frame(const Poly& r) {
  FrameCtx c;
  c.P = r.wirtinger(v_z1);
  c.R = r.wirtinger(v_z2);
  c.Pc = c.P.conjugate();
  c.Rc = c.R.conjugate();
  if (c.R.is_zero())
    fail(ErrorCode::degenerate_boundary_point,
         "frame denominator dr/dz2 is identically zero; rotate the chart first");
  return c;
}

Factored levi_factored(const Poly& r, const FrameCtx& c) {
  Poly r11 = r.wirtinger(v_z1).wirtinger(v_z1b);
  Poly r12 = r.wirtinger(v_z1).wirtinger(v_z2b);
  Poly r21 = r.wirtinger(v_z2).wirtinger(v_z1b);
  Poly r22 = r.wirtinger(v_z2).wirtinger(v_z2b);
  Poly num = r11 * c.R * c.Rc - c.Pc * r12 * c.R - c.P * r21 * c.Rc + c.P * c.Pc * r22;
  return {std::move(num), 1, 1};
}

RationalExpr materialize(const Factored& f, const FrameCtx& c) {
  return RationalExpr(f.num, pow(c.R, f.p) * pow(c.Rc, f.q));
}

}  // namespace

RationalExpr levi_form_coeff(const Poly& r) {
  FrameCtx c = make_frame(r);
  return materialize(levi_factored(r, c), c);
}

RationalExpr iterated_l_coeff(const Poly& r, int j, int k, IteratedOrder order) {
  if (j < 1 || k < 1) fail(ErrorCode::invalid_argument, "iterated coefficient needs j, k >= 1");
  FrameCtx c = make_frame(r);
  Factored f = levi_factored(r, c);
  if (order == IteratedOrder::l1_outermost) {
    for (int i = 1; i < k; ++i) f = apply_conjugate_field(f, c);
    for (int i = 1; i < j; ++i) f = apply_plain_field(f, c);
  } else {
    for (int i = 1; i < j; ++i) f = apply_plain_field(f, c);
    for (int i = 1; i < k; ++i) f = apply_conjugate_field(f, c);
  }
  return materialize(f, c);
}

}  // namespace finsler::sym
