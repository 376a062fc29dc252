#include "finslerlab/domain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "finslerlab/chart.hpp"
#include "finslerlab/errors.hpp"
#include "finslerlab/lowdisc.hpp"
#include "json.hpp"

namespace finsler::domain {

namespace {

constexpr double kPi = 3.14159265358979323846;

using Vec4 = std::array<double, 4>;

double dot4(const Vec4& a, const Vec4& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
}
double norm4(const Vec4& a) { return std::sqrt(dot4(a, a)); }

Vec4 real_of(const C2& z) { return z.array(); }

// Partial-pivot elimination for the 5x5 projection KKT system; small enough
// that a dependency is not worth it.
bool solve5(double a[5][5], double b[5], double x[5]) {
  int perm[5] = {0, 1, 2, 3, 4};
  for (int col = 0; col < 5; ++col) {
    int piv = col;
    for (int rr = col + 1; rr < 5; ++rr)
      if (std::abs(a[perm[rr]][col]) > std::abs(a[perm[piv]][col])) piv = rr;
    std::swap(perm[col], perm[piv]);
    double d = a[perm[col]][col];
    if (std::abs(d) < 1e-14) return false;
    for (int rr = col + 1; rr < 5; ++rr) {
      double f = a[perm[rr]][col] / d;
      if (f == 0.0) continue;
      for (int cc = col; cc < 5; ++cc) a[perm[rr]][cc] -= f * a[perm[col]][cc];
      b[perm[rr]] -= f * b[perm[col]];
    }
  }
  for (int row = 4; row >= 0; --row) {
    double s = b[perm[row]];
    for (int cc = row + 1; cc < 5; ++cc) s -= a[perm[row]][cc] * x[cc];
    x[row] = s / a[perm[row]][row];
  }
  return true;
}

}  // namespace

// Symbolic derivative tables of the smooth defining function, evaluated in
// real coordinates (Re z1, Im z1, Re z2, Im z2).
struct Domain::Calc {
  sym::Poly r;
  sym::Poly rz1, rz2;
  sym::Poly r11, r12, r22;     // pure holomorphic second derivatives
  sym::Poly r11b, r12b, r22b;  // mixed (z_i, conj z_j)
  double coeff_scale = 1.0;

  explicit Calc(const sym::Poly& r_in) : r(r_in) {
    rz1 = r.wirtinger(sym::v_z1);
    rz2 = r.wirtinger(sym::v_z2);
    r11 = rz1.wirtinger(sym::v_z1);
    r12 = rz1.wirtinger(sym::v_z2);
    r22 = rz2.wirtinger(sym::v_z2);
    r11b = rz1.wirtinger(sym::v_z1b);
    r12b = rz1.wirtinger(sym::v_z2b);
    r22b = rz2.wirtinger(sym::v_z2b);
    coeff_scale = std::max(1.0, r.max_abs_coeff());
  }

  double value(const C2& z) const { return r.eval(z).real(); }
  cplx p(const C2& z) const { return rz1.eval(z); }
  cplx q(const C2& z) const { return rz2.eval(z); }

  Vec4 grad(const C2& z) const {
    cplx a = p(z), b = q(z);
    return {2.0 * a.real(), -2.0 * a.imag(), 2.0 * b.real(), -2.0 * b.imag()};
  }

  std::array<Vec4, 4> hess(const C2& z) const {
    cplx A = r11.eval(z), C = r12.eval(z), E = r22.eval(z);
    cplx B = r11b.eval(z), D = r12b.eval(z), F = r22b.eval(z);
    std::array<Vec4, 4> h{};
    h[0][0] = 2.0 * A.real() + 2.0 * B.real();
    h[1][1] = 2.0 * B.real() - 2.0 * A.real();
    h[0][1] = h[1][0] = -2.0 * A.imag();
    h[2][2] = 2.0 * E.real() + 2.0 * F.real();
    h[3][3] = 2.0 * F.real() - 2.0 * E.real();
    h[2][3] = h[3][2] = -2.0 * E.imag();
    h[0][2] = h[2][0] = 2.0 * (C.real() + D.real());
    h[0][3] = h[3][0] = 2.0 * (D.imag() - C.imag());
    h[1][2] = h[2][1] = -2.0 * (C.imag() + D.imag());
    h[1][3] = h[3][1] = 2.0 * (D.real() - C.real());
    return h;
  }

  // complex line representative of the outward normal: conj(dr/dz), normalized
  C2 unit_normal(const C2& z) const {
    cplx a = std::conj(p(z)), b = std::conj(q(z));
    double n = std::sqrt(std::norm(a) + std::norm(b));
    if (n < 1e-12 * coeff_scale)
      fail(ErrorCode::degenerate_boundary_point, "defining gradient vanishes at boundary point");
    return C2(a / n, b / n);
  }
};

// ---------------------------------------------------------------------------
// factories

std::shared_ptr<const Domain> Domain::ball() {
  auto d = std::shared_ptr<Domain>(new Domain());
  d->name_ = "ball";
  d->base_ = BaseKind::ball;
  d->r_ = sym::Poly({{1, 1, 0, 0, 1.0}, {0, 0, 1, 1, 1.0}, {0, 0, 0, 0, -1.0}});
  d->bounding_radius_ = 1.2;
  d->convex_ = true;
  d->m_bound_ = 2;
  d->witness_ = C2(0.0, 0.0);
  d->finalize();
  return d;
}

std::shared_ptr<const Domain> Domain::egg(int k) {
  if (k < 1 || k > 8) fail(ErrorCode::invalid_argument, "egg exponent must lie in [1,8]");
  auto d = std::shared_ptr<Domain>(new Domain());
  d->name_ = "egg" + std::to_string(k);
  d->base_ = k == 1 ? BaseKind::ball : BaseKind::egg;
  d->egg_k_ = k;
  d->r_ = sym::Poly({{uint8_t(k), uint8_t(k), 0, 0, 1.0}, {0, 0, 1, 1, 1.0}, {0, 0, 0, 0, -1.0}});
  d->bounding_radius_ = 1.6;  // |z| on the egg can approach sqrt(2) for large k
  d->convex_ = true;
  d->m_bound_ = 2 * k;
  d->witness_ = C2(0.0, 0.0);
  d->finalize();
  return d;
}

std::shared_ptr<const Domain> Domain::rigid(const std::vector<std::array<double, 5>>& terms,
                                            double radius, int m_bound) {
  if (radius <= 0.0) fail(ErrorCode::parse_error, "rigid domain radius must be positive");
  if (m_bound < 2 || m_bound > 12)
    fail(ErrorCode::parse_error, "rigid domain m_bound must lie in [2,12]");
  // conjugate symmetry of the data: coeff(a,b,c) must equal conj(coeff(b,a,c))
  auto key = [](int a, int b, int c) { return (a * 100 + b) * 100 + c; };
  std::map<int, cplx> coeff;
  for (const auto& t : terms) {
    int a = int(t[0]), b = int(t[1]), c = int(t[2]);
    if (a < 0 || b < 0 || c < 0 || a > 12 || b > 12 || c > 12 || t[0] != a || t[1] != b ||
        t[2] != c)
      fail(ErrorCode::parse_error, "rigid term exponents must be small non-negative integers");
    coeff[key(a, b, c)] += cplx(t[3], t[4]);
  }
  for (const auto& [k, v] : coeff) {
    int c = k % 100, b = (k / 100) % 100, a = k / 10000;
    cplx mirror(0.0, 0.0);
    auto it = coeff.find(key(b, a, c));
    if (it != coeff.end()) mirror = it->second;
    if (std::abs(v - std::conj(mirror)) > 1e-12 * (1.0 + std::abs(v)))
      fail(ErrorCode::parse_error,
           "rigid terms are not conjugate-symmetric: coefficient of (a,b,c) must be the "
           "conjugate of (b,a,c)");
  }

  // r = Im z2 - F(z1, conj z1, Re z2)
  sym::Poly z2 = sym::Poly::variable(sym::v_z2);
  sym::Poly z2b = sym::Poly::variable(sym::v_z2b);
  sym::Poly im_z2 = (z2 - z2b) * sym::Poly(cplx(0.0, -0.5));
  sym::Poly re_z2 = (z2 + z2b) * sym::Poly(0.5);
  sym::Poly F(0.0);
  for (const auto& [k, v] : coeff) {
    int c = k % 100, b = (k / 100) % 100, a = k / 10000;
    sym::Poly term(v);
    if (a > 0) term = term * sym::pow(sym::Poly::variable(sym::v_z1), a);
    if (b > 0) term = term * sym::pow(sym::Poly::variable(sym::v_z1b), b);
    if (c > 0) term = term * sym::pow(re_z2, c);
    F = F + term;
  }
  sym::Poly r = im_z2 - F;
  if (!r.is_conjugate_symmetric(1e-10))
    fail(ErrorCode::parse_error, "rigid defining function is not real-valued");

  auto d = std::shared_ptr<Domain>(new Domain());
  d->name_ = "rigid";
  d->base_ = BaseKind::rigid;
  d->r_ = std::move(r);
  d->bounding_radius_ = radius;
  d->convex_ = false;
  d->m_bound_ = m_bound;

  // witness probing straight down the Im z2 axis from the graph
  double f0 = 0.0;
  auto it0 = coeff.find(0);
  if (it0 != coeff.end()) f0 = it0->second.real();
  bool found = false;
  for (double s : {0.05, 0.1, 0.2, 0.4}) {
    C2 w(cplx(0.0, 0.0), cplx(0.0, f0 - s * radius));
    if (d->r_.eval(w).real() < -1e-12 && norm(w) < 0.95 * radius) {
      d->witness_ = w;
      found = true;
      break;
    }
  }
  if (!found)
    fail(ErrorCode::invalid_argument, "could not find an interior witness for the rigid domain");
  d->finalize();
  return d;
}

std::shared_ptr<const Domain> Domain::cap_of(std::shared_ptr<const Domain> base,
                                             const C2& cut_normal, double cut_offset) {
  if (!base) fail(ErrorCode::invalid_argument, "cap needs a base domain");
  if (base->capped()) fail(ErrorCode::parse_error, "cap of a cap is not supported");
  double nn = norm(cut_normal);
  if (nn < 1e-12) fail(ErrorCode::parse_error, "cut normal must be nonzero");

  auto d = std::shared_ptr<Domain>(new Domain());
  d->name_ = base->name_ + "+cap";
  d->base_ = base->base_;
  d->egg_k_ = base->egg_k_;
  d->r_ = base->r_;
  d->bounding_radius_ = base->bounding_radius_;
  d->convex_ = base->convex_;  // halfspace intersection preserves convexity
  d->m_bound_ = base->m_bound_;
  d->cuts_.push_back({cut_normal * cplx(1.0 / nn, 0.0), cut_offset / nn});

  // witness: walk the base witness away from the cut until strictly inside
  C2 w = base->witness_;
  double diam = 2.0 * d->bounding_radius_;
  const Cut& cut = d->cuts_[0];
  bool ok = false;
  for (int step = 0; step < 40; ++step) {
    double slack = dot4(real_of(w), real_of(cut.normal)) - cut.offset;
    if (slack < -0.02 * diam && d->r_.eval(w).real() < -1e-6) {
      ok = true;
      break;
    }
    w = w + cut.normal * cplx(-0.05 * diam, 0.0);
  }
  if (!ok) fail(ErrorCode::parse_error, "cut leaves no usable interior");
  d->witness_ = w;
  d->finalize();
  return d;
}

std::shared_ptr<const Domain> Domain::from_poly(sym::Poly r, int m_bound, const C2& witness,
                                                double bounding_radius, bool convex,
                                                std::string name) {
  if (!r.is_conjugate_symmetric(1e-10))
    fail(ErrorCode::invalid_argument, "defining polynomial is not real-valued");
  auto d = std::shared_ptr<Domain>(new Domain());
  d->name_ = std::move(name);
  d->base_ = BaseKind::generic;
  d->r_ = std::move(r);
  d->bounding_radius_ = bounding_radius;
  d->convex_ = convex;
  d->m_bound_ = m_bound;
  d->witness_ = witness;
  if (d->r_.eval(witness).real() >= 0.0)
    fail(ErrorCode::invalid_argument, "witness is not inside the domain");
  d->finalize();
  return d;
}

// ---------------------------------------------------------------------------
// json loader

namespace {

std::shared_ptr<const Domain> parse_domain(const nlohmann::json& j);

std::shared_ptr<const Domain> parse_base(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
    fail(ErrorCode::parse_error, "domain description needs a string field 'kind'");
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "ball") return Domain::ball();
  if (kind == "egg") {
    if (!j.contains("k") || !j.at("k").is_number_integer())
      fail(ErrorCode::parse_error, "egg needs an integer exponent 'k'");
    return Domain::egg(j.at("k").get<int>());
  }
  if (kind == "rigid_poly") {
    if (!j.contains("m_bound"))
      fail(ErrorCode::parse_error, "rigid_poly requires an explicit m_bound");
    if (!j.contains("radius") || !j.contains("terms"))
      fail(ErrorCode::parse_error, "rigid_poly needs 'radius' and 'terms'");
    std::vector<std::array<double, 5>> terms;
    for (const auto& row : j.at("terms")) {
      if (!row.is_array() || row.size() != 5)
        fail(ErrorCode::parse_error, "each rigid term is [a, b, c, re, im]");
      terms.push_back({row[0].get<double>(), row[1].get<double>(), row[2].get<double>(),
                       row[3].get<double>(), row[4].get<double>()});
    }
    return Domain::rigid(terms, j.at("radius").get<double>(), j.at("m_bound").get<int>());
  }
  if (kind == "cap") {
    if (!j.contains("base")) fail(ErrorCode::parse_error, "cap needs a 'base' domain");
    auto base = parse_base(j.at("base"));
    if (!j.contains("cut_normal") || !j.at("cut_normal").is_array() ||
        j.at("cut_normal").size() != 4 || !j.contains("cut_offset"))
      fail(ErrorCode::parse_error, "cap needs 'cut_normal' (4 reals) and 'cut_offset'");
    std::array<double, 4> nu{};
    for (int i = 0; i < 4; ++i) nu[i] = j.at("cut_normal")[i].get<double>();
    return Domain::cap_of(base, C2::from_array(nu.data()), j.at("cut_offset").get<double>());
  }
  fail(ErrorCode::parse_error, "unknown domain kind '" + kind + "'");
}

std::shared_ptr<const Domain> parse_domain(const nlohmann::json& j) {
  auto d = parse_base(j);
  if (j.contains("name") || j.contains("collar_eps")) {
    auto copy = std::make_shared<Domain>(*d);
    if (j.contains("name")) copy->set_name(j.at("name").get<std::string>());
    if (j.contains("collar_eps")) {
      double eps = j.at("collar_eps").get<double>();
      if (eps <= 0.0) fail(ErrorCode::parse_error, "collar_eps must be positive");
      copy->shrink_collar(eps);
    }
    return copy;
  }
  return d;
}

}  // namespace

std::shared_ptr<const Domain> Domain::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::parse_error, std::string("domain json: ") + e.what());
  }
  try {
    return parse_domain(j);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorCode::parse_error, std::string("domain json: ") + e.what());
  }
}

std::shared_ptr<const Domain> Domain::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open domain file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

// ---------------------------------------------------------------------------
// geometry

double Domain::defining_value(const C2& z) const {
  double v = calc_->value(z);
  for (const Cut& c : cuts_) v = std::max(v, dot4(real_of(z), real_of(c.normal)) - c.offset);
  if (base_ == BaseKind::rigid) v = std::max(v, norm2(z) - bounding_radius_ * bounding_radius_);
  return v;
}

namespace {

// Distance to the curve u^{2k} + v^2 = 1 (u, v >= 0) from (a, b) >= 0, via the
// parameterization u = sin(t)^{1/k}, v = cos(t). Returns squared distance and
// the foot; flags when two separated local minima tie or a coordinate phase is
// free.
struct EggFoot {
  double u = 0.0, v = 1.0;
  double dist = 0.0;
  bool unique = true;
};

EggFoot egg_profile_project(double a, double b, int k) {
  auto point = [&](double t, double& u, double& v) {
    double s = std::sin(t);
    u = k == 1 ? s : std::pow(std::max(s, 0.0), 1.0 / k);
    v = std::cos(t);
  };
  auto d2 = [&](double t) {
    double u, v;
    point(t, u, v);
    return (u - a) * (u - a) + (v - b) * (v - b);
  };

  const int n = 160;
  std::array<double, n + 1> val{};
  for (int i = 0; i <= n; ++i) val[i] = d2(kPi / 2.0 * i / n);

  struct Cand {
    double t, d2;
  };
  std::vector<Cand> cands;
  auto refine = [&](double lo, double hi) {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = hi - gr * (hi - lo), dpt = lo + gr * (hi - lo);
    double fc = d2(c), fd = d2(dpt);
    while (hi - lo > 1e-13) {
      if (fc < fd) {
        hi = dpt;
        dpt = c;
        fd = fc;
        c = hi - gr * (hi - lo);
        fc = d2(c);
      } else {
        lo = c;
        c = dpt;
        fc = fd;
        dpt = lo + gr * (hi - lo);
        fd = d2(dpt);
      }
    }
    double t = 0.5 * (lo + hi);
    cands.push_back({t, d2(t)});
  };
  double h = kPi / 2.0 / n;
  if (val[0] <= val[1]) refine(0.0, h);
  if (val[n] <= val[n - 1]) refine(kPi / 2.0 - h, kPi / 2.0);
  for (int i = 1; i < n; ++i)
    if (val[i] <= val[i - 1] && val[i] <= val[i + 1]) refine((i - 1) * h, (i + 1) * h);

  EggFoot best;
  double bd2 = 1e300, bt = 0.0;
  for (const Cand& c : cands)
    if (c.d2 < bd2) {
      bd2 = c.d2;
      bt = c.t;
    }
  point(bt, best.u, best.v);
  best.dist = std::sqrt(std::max(bd2, 0.0));
  for (const Cand& c : cands) {
    if (std::abs(c.t - bt) < 1e-5) continue;
    double cu, cv;
    point(c.t, cu, cv);
    if (std::hypot(cu - best.u, cv - best.v) < 1e-5) continue;
    if (c.d2 - bd2 < 1e-7 * (1.0 + bd2)) best.unique = false;
  }
  return best;
}

// Reduced-precision variant for the hot probe path: coarse grid, one golden
// bracket, parabolic polish. Foot accuracy ~1e-10, spacing is wide enough to
// bracket the global minimum for every (a, b) in the egg's bounding box.
EggFoot egg_profile_probe(double a, double b, int k) {
  auto point = [&](double t, double& u, double& v) {
    double s = std::sin(t);
    u = k == 1 ? s : std::pow(std::max(s, 0.0), 1.0 / k);
    v = std::cos(t);
  };
  auto d2 = [&](double t) {
    double u, v;
    point(t, u, v);
    return (u - a) * (u - a) + (v - b) * (v - b);
  };

  const int n = 32;
  double h = kPi / 2.0 / n;
  double bestv = 1e300;
  int besti = 0;
  for (int i = 0; i <= n; ++i) {
    double f = d2(i * h);
    if (f < bestv) {
      bestv = f;
      besti = i;
    }
  }
  const double gr_u = 0.5 * (std::sqrt(5.0) - 1.0);
  if (besti <= 1 && k > 1) {
    // sin(t)^{1/k} has a cusp at t = 0; switch to the u-parameterization of
    // the curve, which is smooth at the pole
    auto d2u = [&](double u) {
      double v = std::sqrt(std::max(1.0 - std::pow(u, 2.0 * k), 0.0));
      return (u - a) * (u - a) + (v - b) * (v - b);
    };
    double lo = 0.0, hi = std::pow(std::sin(std::min(2.0 * h, kPi / 2.0)), 1.0 / k);
    double c = hi - gr_u * (hi - lo), d = lo + gr_u * (hi - lo);
    double fc = d2u(c), fd = d2u(d);
    for (int it = 0; it < 40; ++it) {
      if (fc < fd) {
        hi = d;
        d = c;
        fd = fc;
        c = hi - gr_u * (hi - lo);
        fc = d2u(c);
      } else {
        lo = c;
        c = d;
        fc = fd;
        d = lo + gr_u * (hi - lo);
        fd = d2u(d);
      }
    }
    EggFoot best;
    best.u = 0.5 * (lo + hi);
    best.v = std::sqrt(std::max(1.0 - std::pow(best.u, 2.0 * k), 0.0));
    best.dist = std::hypot(best.u - a, best.v - b);
    return best;
  }
  double lo = std::max(0.0, (besti - 1) * h), hi = std::min(kPi / 2.0, (besti + 1) * h);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
  double fc = d2(c), fd = d2(d);
  for (int it = 0; it < 22; ++it) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - gr * (hi - lo);
      fc = d2(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + gr * (hi - lo);
      fd = d2(d);
    }
  }
  // one parabolic step through (lo, mid, hi) sharpens the last digits
  double tm = 0.5 * (lo + hi);
  double fl = d2(lo), fm = d2(tm), fh = d2(hi);
  double denom = (fl - 2.0 * fm + fh);
  double t = tm;
  if (std::abs(denom) > 1e-300) {
    double shift = 0.5 * (hi - lo) * 0.5 * (fl - fh) / denom;
    if (std::abs(shift) < (hi - lo)) t = tm + shift;
  }
  EggFoot best;
  point(std::clamp(t, 0.0, kPi / 2.0), best.u, best.v);
  best.dist = std::hypot(best.u - a, best.v - b);
  return best;
}

}  // namespace

CollarProbe Domain::collar_probe(const C2& z) const {
  CollarProbe out;
  if (base_ == BaseKind::ball) {
    double nz = norm(z);
    out.delta = 1.0 - nz;
    out.normal = nz < 1e-12 ? C2(0.0, 1.0) : z * cplx(1.0 / nz, 0.0);
  } else if (base_ == BaseKind::egg) {
    double a = std::abs(z.z1), b = std::abs(z.z2);
    EggFoot f = egg_profile_probe(a, b, egg_k_);
    cplx ph1 = a < 1e-12 ? cplx(1.0, 0.0) : z.z1 / a;
    cplx ph2 = b < 1e-12 ? cplx(1.0, 0.0) : z.z2 / b;
    out.delta = f.dist;
    int k = egg_k_;
    cplx n1 = double(k) * std::pow(f.u, 2 * k - 1) * ph1;
    cplx n2 = f.v * ph2;
    double nn = std::sqrt(std::norm(n1) + std::norm(n2));
    out.normal = C2(n1 / nn, n2 / nn);
  } else {
    Projection p = project_soft(z);
    out.delta = p.distance;
    out.normal = p.normal;
    return out;
  }
  for (std::size_t i = 0; i < cuts_.size(); ++i) {
    double d = cuts_[i].offset - dot4(real_of(z), real_of(cuts_[i].normal));
    if (d < out.delta) {
      out.delta = d;
      out.normal = cuts_[i].normal;
    }
  }
  return out;
}

double Domain::smooth_distance(const C2& z, Projection* proj, bool* unique) const {
  bool uniq = true;
  double dist_out = 0.0;
  C2 foot, normal;

  if (base_ == BaseKind::ball) {
    double nz = norm(z);
    dist_out = 1.0 - nz;
    if (nz < 1e-12) {
      foot = C2(0.0, 1.0);
      uniq = false;
    } else {
      foot = z * cplx(1.0 / nz, 0.0);
    }
    normal = foot;
  } else if (base_ == BaseKind::egg) {
    double a = std::abs(z.z1), b = std::abs(z.z2);
    EggFoot f = egg_profile_project(a, b, egg_k_);
    uniq = f.unique;
    if (a < 1e-9 && f.u > 1e-6) uniq = false;  // z1 phase free on the foot
    if (b < 1e-9 && f.v > 1e-6) uniq = false;
    cplx ph1 = a < 1e-12 ? cplx(1.0, 0.0) : z.z1 / a;
    cplx ph2 = b < 1e-12 ? cplx(1.0, 0.0) : z.z2 / b;
    foot = C2(f.u * ph1, f.v * ph2);
    dist_out = f.dist;
    int k = egg_k_;
    cplx n1 = double(k) * std::pow(f.u, 2 * k - 1) * ph1;
    cplx n2 = f.v * ph2;
    double nn = std::sqrt(std::norm(n1) + std::norm(n2));
    normal = C2(n1 / nn, n2 / nn);
  } else {
    // generic multistart Newton on the KKT system of min |w-z|^2 on {r=0}
    struct Hit {
      C2 foot;
      double dist;
    };
    std::vector<Hit> hits;
    Vec4 zr = real_of(z);

    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(seeds_.size());
    for (std::size_t i = 0; i < seeds_.size(); ++i) order.emplace_back(dist(z, seeds_[i]), i);
    std::sort(order.begin(), order.end());
    std::size_t tries = std::min<std::size_t>(order.size(), 6);

    for (std::size_t s = 0; s < tries; ++s) {
      C2 w = seeds_[order[s].second];
      Vec4 g = calc_->grad(w);
      double gn = norm4(g);
      if (gn < 1e-12) continue;
      double lam = dist(z, w) / gn;
      bool conv = false;
      for (int it = 0; it < 60; ++it) {
        Vec4 wr = real_of(w);
        g = calc_->grad(w);
        auto H = calc_->hess(w);
        double rv = calc_->value(w);
        double Fv[5];
        double fn2 = 0.0;
        for (int i = 0; i < 4; ++i) {
          Fv[i] = wr[i] - zr[i] - lam * g[i];
          fn2 += Fv[i] * Fv[i];
        }
        Fv[4] = rv;
        fn2 += rv * rv;
        if (fn2 < 1e-24 * (1.0 + norm2(z))) {
          conv = true;
          break;
        }
        double A[5][5];
        for (int i = 0; i < 4; ++i) {
          for (int j = 0; j < 4; ++j) A[i][j] = (i == j ? 1.0 : 0.0) - lam * H[i][j];
          A[i][4] = -g[i];
          A[4][i] = g[i];
        }
        A[4][4] = 0.0;
        double rhs[5] = {-Fv[0], -Fv[1], -Fv[2], -Fv[3], -Fv[4]};
        double step[5];
        if (!solve5(A, rhs, step)) break;
        double alpha = 1.0;
        for (int bt = 0; bt < 8; ++bt) {
          Vec4 wn{wr[0] + alpha * step[0], wr[1] + alpha * step[1], wr[2] + alpha * step[2],
                  wr[3] + alpha * step[3]};
          double ln = lam + alpha * step[4];
          C2 wc = C2::from_array(wn.data());
          Vec4 gg = calc_->grad(wc);
          double rr = calc_->value(wc);
          double f2 = rr * rr;
          for (int i = 0; i < 4; ++i) {
            double fi = wn[i] - zr[i] - ln * gg[i];
            f2 += fi * fi;
          }
          if (f2 < fn2 * (1.0 - 1e-4 * alpha) || bt == 7) {
            w = wc;
            lam = ln;
            break;
          }
          alpha *= 0.5;
        }
      }
      if (conv && std::abs(calc_->value(w)) < 1e-8 * calc_->coeff_scale)
        hits.push_back({w, dist(z, w)});
    }
    if (hits.empty())
      fail(ErrorCode::projection_failed, "no projection candidate converged on the boundary");
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.dist < b.dist; });
    foot = hits[0].foot;
    dist_out = hits[0].dist;
    double diam = 2.0 * bounding_radius_;
    for (std::size_t i = 1; i < hits.size(); ++i)
      if (hits[i].dist - dist_out < 1e-7 * (1.0 + dist_out) &&
          dist(hits[i].foot, foot) > 1e-6 * diam)
        uniq = false;
    normal = calc_->unit_normal(foot);
  }

  if (proj) {
    proj->foot = foot;
    proj->distance = dist_out;
    proj->normal = normal;
    proj->on_cut = false;
    proj->unique = uniq;
  }
  if (unique) *unique = uniq;
  return dist_out;
}

double Domain::cut_distance(const C2& z, std::size_t idx, Projection* proj) const {
  const Cut& c = cuts_[idx];
  Vec4 x = real_of(z), nu = real_of(c.normal);
  double d = c.offset - dot4(x, nu);  // nu is unit length
  if (proj) {
    Vec4 f{x[0] + d * nu[0], x[1] + d * nu[1], x[2] + d * nu[2], x[3] + d * nu[3]};
    proj->foot = C2::from_array(f.data());
    proj->distance = d;
    proj->normal = c.normal;
    proj->on_cut = true;
    proj->unique = true;
  }
  return d;
}

Projection Domain::project_soft(const C2& z) const {
  if (!inside(z)) fail(ErrorCode::invalid_argument, "projection point is not inside the domain");
  Projection best;
  smooth_distance(z, &best, nullptr);
  auto consider = [&](const Projection& p) {
    if (p.distance < best.distance) {
      bool tie = best.distance - p.distance < 1e-7 * (1.0 + p.distance);
      bool apart = dist(p.foot, best.foot) > 1e-6 * bounding_radius_;
      Projection np = p;
      if (tie && apart) np.unique = false;
      best = np;
    } else if (p.distance - best.distance < 1e-7 * (1.0 + best.distance) &&
               dist(p.foot, best.foot) > 1e-6 * bounding_radius_) {
      best.unique = false;
    }
  };
  for (std::size_t i = 0; i < cuts_.size(); ++i) {
    Projection p;
    cut_distance(z, i, &p);
    consider(p);
  }
  if (base_ == BaseKind::rigid) {
    double nz = norm(z);
    Projection p;
    p.distance = bounding_radius_ - nz;
    p.foot = nz < 1e-12 ? C2(0.0, bounding_radius_) : z * cplx(bounding_radius_ / nz, 0.0);
    p.normal = nz < 1e-12 ? C2(0.0, 1.0) : z * cplx(1.0 / nz, 0.0);
    p.on_cut = true;  // treated like a side constraint
    p.unique = nz >= 1e-12;
    consider(p);
  }
  return best;
}

double Domain::boundary_distance(const C2& z) const { return project_soft(z).distance; }

Projection Domain::boundary_project(const C2& z) const {
  Projection p = project_soft(z);
  if (p.distance > collar())
    fail(ErrorCode::outside_collar, "point is deeper than the validated collar");
  if (!p.unique)
    fail(ErrorCode::projection_failed, "nearest boundary point is not unique");
  return p;
}

C2 Domain::outward_normal(const C2& p) const {
  double scale = std::max(1.0, calc_->coeff_scale) * (1.0 + norm2(p));
  double sv = calc_->value(p);
  double best = std::abs(sv);
  int which = -1;  // -1 smooth, cuts by index, -2 bounding sphere
  double second = 1e300;
  for (std::size_t i = 0; i < cuts_.size(); ++i) {
    double cv = std::abs(dot4(real_of(p), real_of(cuts_[i].normal)) - cuts_[i].offset);
    if (cv < best) {
      second = best;
      best = cv;
      which = int(i);
    } else {
      second = std::min(second, cv);
    }
  }
  if (base_ == BaseKind::rigid) {
    double bv = std::abs(norm(p) - bounding_radius_);
    if (bv < best) {
      second = best;
      best = bv;
      which = -2;
    } else {
      second = std::min(second, bv);
    }
  }
  if (best > 1e-6 * scale)
    fail(ErrorCode::invalid_argument, "outward_normal expects a boundary point");
  if (second < 1e-9 * scale)
    fail(ErrorCode::degenerate_boundary_point, "normal undefined on a corner of the boundary");
  if (which == -1) return calc_->unit_normal(p);
  if (which == -2) return p * cplx(1.0 / norm(p), 0.0);
  return cuts_[std::size_t(which)].normal;
}

std::pair<C2, C2> Domain::normal_decompose(const C2& z, const C2& X) const {
  Projection p = project_soft(z);
  cplx comp = hdot(X, p.normal);
  C2 xn = p.normal * comp;
  return {xn, X - xn};
}

double Domain::ray_exit(const C2& z, const C2& w, double tmax) const {
  // first boundary crossing along t -> z + t w for t in (0, tmax]; w unit
  double best = tmax;

  // affine cuts have closed-form crossings
  for (const Cut& c : cuts_) {
    double den = dot4(real_of(w), real_of(c.normal));
    if (den > 1e-14) {
      double t = (c.offset - dot4(real_of(z), real_of(c.normal))) / den;
      if (t > 0.0) best = std::min(best, t);
    }
  }
  if (base_ == BaseKind::rigid) {
    // |z + t w| = R
    double aw = norm2(w);
    double b = 2.0 * (hdot(z, w)).real();
    double c0 = norm2(z) - bounding_radius_ * bounding_radius_;
    double disc = b * b - 4.0 * aw * c0;
    if (disc >= 0.0) {
      double t = (-b + std::sqrt(disc)) / (2.0 * aw);
      if (t > 0.0) best = std::min(best, t);
    }
  }

  if (base_ == BaseKind::ball) {
    double aw = norm2(w);
    double b = 2.0 * (hdot(z, w)).real();
    double c0 = norm2(z) - 1.0;
    double disc = b * b - 4.0 * aw * c0;
    if (disc >= 0.0) {
      double t = (-b + std::sqrt(disc)) / (2.0 * aw);
      if (t > 0.0) best = std::min(best, t);
    }
    return best;
  }

  // smooth part: scan for the first sign change, then bisect
  std::function<double(double)> f = [&](double t) { return calc_->value(z + w * cplx(t, 0.0)); };
  if (base_ == BaseKind::egg) {
    // |z1 + t w1|^2 and |z2 + t w2|^2 are quadratics in t; avoid the generic
    // polynomial evaluator in this hot path
    double A = std::norm(z.z1), B = 2.0 * (std::conj(z.z1) * w.z1).real(), Cq = std::norm(w.z1);
    double D = std::norm(z.z2), E = 2.0 * (std::conj(z.z2) * w.z2).real(), F = std::norm(w.z2);
    int k = egg_k_;
    f = [=](double t) {
      double q = A + t * (B + t * Cq);
      double p = 1.0;
      for (int i = 0; i < k; ++i) p *= q;
      return p + D + t * (E + t * F) - 1.0;
    };
  }
  double f0 = f(0.0);
  if (f0 >= 0.0) return 0.0;
  double lo = 0.0, hi = best;
  if (convex_) {
    // one crossing only; skip the scan
    if (f(best) < 0.0) return best;
  } else {
    const int steps = 64;
    double prev_t = 0.0;
    bool bracketed = false;
    for (int i = 1; i <= steps; ++i) {
      double t = best * i / steps;
      if (f(t) >= 0.0) {
        hi = t;
        bracketed = true;
        break;
      }
      prev_t = t;
    }
    if (!bracketed) return best;
    lo = prev_t;
  }
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    if (hi - lo < 1e-10 * (1.0 + hi)) break;
    if (f(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double Domain::directional_distance(const C2& z, const C2& v) const {
  double nv = norm(v);
  if (nv < 1e-300) fail(ErrorCode::invalid_argument, "directional distance needs a direction");
  if (!inside(z)) fail(ErrorCode::invalid_argument, "directional distance from an outside point");
  C2 u = v * cplx(1.0 / nv, 0.0);

  if (base_ == BaseKind::ball) {
    // the section {z + c u} meets the sphere in a circle: closed form
    cplx ch = hdot(z, u);
    double ach = std::abs(ch);
    double best = std::sqrt(ach * ach + 1.0 - norm2(z)) - ach;
    // affine faces meet the section in straight lines
    for (const Cut& c : cuts_) {
      double alpha = c.offset - dot4(real_of(z), real_of(c.normal));
      double beta = dot4(real_of(u), real_of(c.normal));
      double gamma = dot4(real_of(u * cplx(0.0, 1.0)), real_of(c.normal));
      double den = std::hypot(beta, gamma);
      if (den > 1e-14) best = std::min(best, alpha / den);
    }
    return best;
  }

  double tmax = 4.0 * bounding_radius_;

  auto hit = [&](double psi) {
    cplx ph(std::cos(psi), std::sin(psi));
    return ray_exit(z, u * ph, tmax);
  };

  // polar grid, then golden refinement of every circular local minimum (convex
  // sections can carry a couple of competing minima)
  const int n = 32;
  std::array<double, n> vals{};
  for (int i = 0; i < n; ++i) vals[i] = hit(2.0 * kPi * i / n);
  double best = 1e300;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int i = 0; i < n; ++i) {
    if (vals[i] > vals[(i + n - 1) % n] || vals[i] > vals[(i + 1) % n]) continue;
    double lo = 2.0 * kPi * (i - 1) / n;
    double hi = 2.0 * kPi * (i + 1) / n;
    double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
    double fc = hit(c), fd = hit(d);
    while (hi - lo > 1e-8) {
      if (fc < fd) {
        hi = d;
        d = c;
        fd = fc;
        c = hi - gr * (hi - lo);
        fc = hit(c);
      } else {
        lo = c;
        c = d;
        fc = fd;
        d = lo + gr * (hi - lo);
        fd = hit(d);
      }
    }
    best = std::min(best, std::min(fc, fd));
  }
  return best;
}

int Domain::dangelo_type(const C2& p, int m_max) const {
  if (m_max < 2 || m_max > 12) fail(ErrorCode::invalid_argument, "type bound must lie in [2,12]");
  double scale = std::max(1.0, calc_->coeff_scale) * (1.0 + norm2(p));
  if (std::abs(calc_->value(p)) > 1e-6 * scale)
    fail(ErrorCode::invalid_argument, "type point must lie on the boundary");
  for (const Cut& c : cuts_)
    if (std::abs(dot4(real_of(p), real_of(c.normal)) - c.offset) < 1e-6 * scale)
      fail(ErrorCode::degenerate_boundary_point, "type is only defined on the smooth face");
  C2 n = calc_->unit_normal(p);
  auto frame = chart::build_chart_frame(r_, p, n, m_max, 0.5);
  auto pv = frame.engine->eval(frame.to_chart(p));
  double cs = 0.0;
  for (int l = 2; l <= m_max; ++l) cs = std::max(cs, pv.c[l]);
  if (cs < 1e-14)
    fail(ErrorCode::degenerate_boundary_point,
         "all commutator invariants vanish through the requested order");
  for (int l = 2; l <= m_max; ++l)
    if (pv.c[l] > 1e-9 * cs) return l;
  fail(ErrorCode::degenerate_boundary_point, "type exceeds the requested bound");
}

C2 Domain::fiber_point(const C2& p, double depth) const {
  if (!(depth > 0.0)) fail(ErrorCode::invalid_argument, "fiber depth must be positive");
  if (depth > collar() * (1.0 + 1e-9))
    fail(ErrorCode::outside_collar, "fiber depth exceeds the validated collar");
  C2 n = outward_normal(p);
  C2 x = p + n * cplx(-depth, 0.0);
  if (!inside(x))
    fail(ErrorCode::degenerate_boundary_point, "fiber point left the domain; collar unusable here");
  return x;
}

C2 Domain::shoot_boundary(const C2& direction) const {
  double nd = norm(direction);
  if (nd < 1e-300) fail(ErrorCode::invalid_argument, "shoot needs a direction");
  C2 u = direction * cplx(1.0 / nd, 0.0);
  double tmax = 4.0 * bounding_radius_;
  auto f = [&](double t) { return defining_value(witness_ + u * cplx(t, 0.0)); };
  if (f(0.0) >= 0.0) fail(ErrorCode::internal, "witness left the domain");
  const int steps = 128;
  double lo = 0.0, hi = -1.0;
  for (int i = 1; i <= steps; ++i) {
    double t = tmax * i / steps;
    if (f(t) >= 0.0) {
      hi = t;
      break;
    }
    lo = t;
  }
  if (hi < 0.0) fail(ErrorCode::internal, "boundary not found along the ray");
  for (int it = 0; it < 80; ++it) {
    double mid = 0.5 * (lo + hi);
    if (hi - lo < 1e-12 * tmax) break;
    if (f(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return witness_ + u * cplx(0.5 * (lo + hi), 0.0);
}

namespace {

C2 gauss_from_unit_cube(const std::array<double, 4>& u) {
  // Box-Muller in pairs; inputs from the low-discrepancy sequence
  double r1 = std::sqrt(-2.0 * std::log(std::max(u[0], 1e-16)));
  double r2 = std::sqrt(-2.0 * std::log(std::max(u[2], 1e-16)));
  return C2(cplx(r1 * std::cos(2.0 * kPi * u[1]), r1 * std::sin(2.0 * kPi * u[1])),
            cplx(r2 * std::cos(2.0 * kPi * u[3]), r2 * std::sin(2.0 * kPi * u[3])));
}

}  // namespace

bool Domain::on_distinguished_face(const C2& p, double margin) const {
  for (const Cut& c : cuts_)
    if (c.offset - dot4(real_of(p), real_of(c.normal)) < margin) return false;
  if (base_ == BaseKind::rigid && bounding_radius_ - norm(p) < margin) return false;
  double scale = std::max(1.0, calc_->coeff_scale) * (1.0 + norm2(p));
  return std::abs(calc_->value(p)) < 1e-6 * scale;
}

std::vector<C2> Domain::boundary_sample(std::size_t n) const {
  std::vector<C2> out;
  out.reserve(n);
  R4Seq seq;
  double margin = 0.05 * 2.0 * bounding_radius_;
  std::size_t attempts = 0, cap = 400 * n + 1000;
  while (out.size() < n && attempts++ < cap) {
    C2 dir = gauss_from_unit_cube(seq.next());
    if (norm(dir) < 1e-9) continue;
    C2 p = shoot_boundary(dir);
    if (!on_distinguished_face(p, margin)) continue;
    out.push_back(p);
  }
  if (out.size() < n)
    fail(ErrorCode::internal, "could not populate the requested boundary sample");
  return out;
}

C2 Domain::random_boundary_point(Rng& rng) const {
  double margin = 0.02 * 2.0 * bounding_radius_;
  for (int attempt = 0; attempt < 4000; ++attempt) {
    C2 p = shoot_boundary(rng.gaussian_c2());
    if (on_distinguished_face(p, margin)) return p;
  }
  fail(ErrorCode::internal, "no boundary point found on the distinguished face");
}

C2 Domain::random_collar_point(Rng& rng, double depth_min, double depth_max) const {
  double hi = std::min(depth_max, 0.95 * collar());
  double lo = std::min(depth_min, hi);
  for (int attempt = 0; attempt < 200; ++attempt) {
    C2 p = random_boundary_point(rng);
    double t = rng.log_uniform(lo, hi);
    C2 n;
    try {
      n = outward_normal(p);
    } catch (const Error&) {
      continue;
    }
    C2 x = p + n * cplx(-t, 0.0);
    if (inside(x)) return x;
  }
  fail(ErrorCode::internal, "could not draw a collar point");
}

// ---------------------------------------------------------------------------
// finalize: derivative tables, seed cloud, collar estimation

void Domain::finalize() {
  calc_ = std::make_shared<const Calc>(r_);
  if (defining_value(witness_) >= 0.0)
    fail(ErrorCode::invalid_argument, "domain witness is not interior");

  // projection seeds for the generic Newton path
  if (base_ == BaseKind::rigid || base_ == BaseKind::generic) {
    R4Seq seq;
    for (int i = 0; i < 256; ++i) {
      C2 dir = gauss_from_unit_cube(seq.next());
      if (norm(dir) < 1e-9) continue;
      C2 p = shoot_boundary(dir);
      double scale = std::max(1.0, calc_->coeff_scale) * (1.0 + norm2(p));
      if (std::abs(calc_->value(p)) < 1e-6 * scale) seeds_.push_back(p);
    }
    if (seeds_.size() < 32)
      fail(ErrorCode::internal, "too few smooth boundary seeds for projection");
  }
}

// Largest uniform fiber depth with a unique projection that returns to the
// sample point, halved for safety. Runs once, on first demand.
void Domain::ensure_collar() const {
  if (collar_eps_ >= 0.0) return;
  std::vector<C2> samples;
  try {
    samples = boundary_sample(2000);
  } catch (const Error&) {
    samples = boundary_sample(200);
  }
  double diam = 2.0 * bounding_radius_;
  std::vector<double> ladder;
  for (double t = 0.5 * diam; t > 1e-3; t *= 0.7) ladder.push_back(t);

  double t_min = ladder.front();
  for (const C2& p : samples) {
    C2 n;
    try {
      n = outward_normal(p);
    } catch (const Error&) {
      continue;  // seam-adjacent sample
    }
    double tp = 0.0;
    for (double t : ladder) {
      C2 x = p + n * cplx(-t, 0.0);
      if (!inside(x)) continue;
      Projection pr;
      try {
        pr = project_soft(x);
      } catch (const Error&) {
        continue;
      }
      if (!pr.unique) continue;
      if (dist(pr.foot, p) > 1e-5 * diam + 0.02 * t) continue;
      tp = t;
      break;
    }
    if (tp == 0.0) tp = ladder.back();
    t_min = std::min(t_min, tp);
  }
  double est = 0.5 * t_min;
  if (collar_override_ && *collar_override_ < est) est = *collar_override_;
  collar_eps_ = est;
}

void Domain::set_name(std::string n) { name_ = std::move(n); }

void Domain::shrink_collar(double eps) {
  ensure_collar();
  collar_eps_ = std::min(collar_eps_, eps);
}

}  // namespace finsler::domain
