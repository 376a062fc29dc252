#include "finslerlab/chart.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "finslerlab/errors.hpp"
#include "finslerlab/lowdisc.hpp"

namespace finsler::chart {

std::array<cplx, 4> rotation_to_normal(const C2& n) {
  double nn = norm(n);
  if (std::abs(nn - 1.0) > 1e-8)
    fail(ErrorCode::invalid_argument, "rotation_to_normal expects a unit normal");
  // h spans the complex tangent line at the center
  cplx h1 = -std::conj(n.z2), h2 = std::conj(n.z1);
  const cplx i_unit(0.0, 1.0);
  return {std::conj(h1), std::conj(h2), i_unit * std::conj(n.z1), i_unit * std::conj(n.z2)};
}

std::array<cplx, 4> adjoint(const std::array<cplx, 4>& u) {
  return {std::conj(u[0]), std::conj(u[2]), std::conj(u[1]), std::conj(u[3])};
}

C2 apply(const std::array<cplx, 4>& u, const C2& z) {
  return C2(u[0] * z.z1 + u[1] * z.z2, u[2] * z.z1 + u[3] * z.z2);
}

namespace {

struct Node {
  enum Kind { k_zero, k_const, k_leaf, k_add, k_sub, k_mul } kind;
  cplx cval{0.0, 0.0};
  int leaf_idx = -1;
  int a = -1, b = -1;
};

}  // namespace

struct CoeffEngine::Impl {
  sym::Poly r;
  sym::IteratedOrder order;
  int m;

  std::vector<Node> nodes;
  std::vector<sym::Poly> leaf_polys;
  std::map<sym::Exponents, sym::Poly> deriv_poly_cache;
  std::map<sym::Exponents, int> leaf_node_cache;
  std::map<std::tuple<int, int, int>, int> op_cache;
  std::map<std::pair<double, double>, int> const_cache;
  std::map<std::pair<int, int>, int> node_deriv_cache;

  struct Root {
    int j, k;
    int num;
    int p, q;
  };
  std::vector<Root> roots;
  int n_P = -1, n_Pc = -1, n_R = -1, n_Rc = -1;
  double r_scale = 1.0;

  // evaluation plan: live nodes in dependency order, leaves as flat term lists
  struct LeafTerm {
    unsigned char a, b, c, d;
    cplx coeff;
  };
  std::vector<int> eval_order;
  std::vector<std::vector<LeafTerm>> leaf_terms;
  int max_pow = 1;

  mutable std::vector<std::vector<sym::RationalExpr>> expanded;  // index l
  mutable std::vector<bool> expanded_built;
  mutable std::mutex expand_mutex;

  // ---- node constructors with light simplification + hash consing ----

  int zero() { return 0; }

  int constant(cplx c) {
    if (c == cplx(0.0, 0.0)) return 0;
    auto key = std::make_pair(c.real(), c.imag());
    auto it = const_cache.find(key);
    if (it != const_cache.end()) return it->second;
    nodes.push_back({Node::k_const, c, -1, -1, -1});
    int id = int(nodes.size()) - 1;
    const_cache[key] = id;
    return id;
  }

  const sym::Poly& deriv_poly(const sym::Exponents& alpha) {
    auto it = deriv_poly_cache.find(alpha);
    if (it != deriv_poly_cache.end()) return it->second;
    // peel one derivative off the highest nonzero slot
    for (int v = 3; v >= 0; --v) {
      if (alpha[v] > 0) {
        sym::Exponents prev = alpha;
        prev[v] -= 1;
        sym::Poly p = deriv_poly(prev).wirtinger(sym::Var(v));
        return deriv_poly_cache.emplace(alpha, std::move(p)).first->second;
      }
    }
    return deriv_poly_cache.emplace(alpha, r).first->second;
  }

  int leaf(const sym::Exponents& alpha) {
    auto it = leaf_node_cache.find(alpha);
    if (it != leaf_node_cache.end()) return it->second;
    const sym::Poly& p = deriv_poly(alpha);
    int id;
    if (p.is_zero()) {
      id = 0;
    } else if (p.is_constant()) {
      id = constant(p.constant_value());
    } else {
      leaf_polys.push_back(p);
      nodes.push_back({Node::k_leaf, cplx(0.0, 0.0), int(leaf_polys.size()) - 1, -1, -1});
      id = int(nodes.size()) - 1;
    }
    leaf_node_cache[alpha] = id;
    return id;
  }

  int op(Node::Kind kind, int a, int b) {
    if (kind == Node::k_mul && a > b) std::swap(a, b);
    auto key = std::make_tuple(int(kind), a, b);
    auto it = op_cache.find(key);
    if (it != op_cache.end()) return it->second;
    nodes.push_back({kind, cplx(0.0, 0.0), -1, a, b});
    int id = int(nodes.size()) - 1;
    op_cache[key] = id;
    return id;
  }

  int add(int a, int b) {
    if (a == 0) return b;
    if (b == 0) return a;
    if (nodes[a].kind == Node::k_const && nodes[b].kind == Node::k_const)
      return constant(nodes[a].cval + nodes[b].cval);
    return op(Node::k_add, a, b);
  }

  int sub(int a, int b) {
    if (b == 0) return a;
    if (a == b) return 0;
    if (nodes[a].kind == Node::k_const && nodes[b].kind == Node::k_const)
      return constant(nodes[a].cval - nodes[b].cval);
    if (a == 0 && nodes[b].kind == Node::k_const) return constant(-nodes[b].cval);
    return op(Node::k_sub, a, b);
  }

  int mul(int a, int b) {
    if (a == 0 || b == 0) return 0;
    if (nodes[a].kind == Node::k_const && nodes[b].kind == Node::k_const)
      return constant(nodes[a].cval * nodes[b].cval);
    if (nodes[a].kind == Node::k_const && nodes[a].cval == cplx(1.0, 0.0)) return b;
    if (nodes[b].kind == Node::k_const && nodes[b].cval == cplx(1.0, 0.0)) return a;
    return op(Node::k_mul, a, b);
  }

  int scale(double s, int a) { return mul(constant(cplx(s, 0.0)), a); }

  int deriv(int node, sym::Var v) {
    auto key = std::make_pair(node, int(v));
    auto it = node_deriv_cache.find(key);
    if (it != node_deriv_cache.end()) return it->second;
    const Node n = nodes[node];
    int out;
    switch (n.kind) {
      case Node::k_zero:
      case Node::k_const:
        out = 0;
        break;
      case Node::k_leaf: {
        // recover alpha from the cache (leaf nodes are unique per alpha)
        sym::Exponents alpha{};
        for (const auto& [al, id] : leaf_node_cache)
          if (id == node) alpha = al;
        sym::Exponents up = alpha;
        up[int(v)] += 1;
        out = leaf(up);
        break;
      }
      case Node::k_add:
        out = add(deriv(n.a, v), deriv(n.b, v));
        break;
      case Node::k_sub:
        out = sub(deriv(n.a, v), deriv(n.b, v));
        break;
      case Node::k_mul:
        out = add(mul(deriv(n.a, v), n.b), mul(n.a, deriv(n.b, v)));
        break;
      default:
        out = 0;
    }
    node_deriv_cache[key] = out;
    return out;
  }

  // ---- factored rational recursion: value = num / (R^p Rc^q) ----

  struct FNode {
    int num;
    int p, q;
  };

  FNode quotient_deriv(const FNode& f, sym::Var v) {
    int dn = deriv(f.num, v);
    int dR = deriv(n_R, v);
    int dRc = deriv(n_Rc, v);
    int lhs = mul(dn, mul(n_R, n_Rc));
    int rhs = mul(f.num, add(scale(double(f.p), mul(dR, n_Rc)), scale(double(f.q), mul(n_R, dRc))));
    return {sub(lhs, rhs), f.p + 1, f.q + 1};
  }

  FNode apply_plain(const FNode& f) {
    FNode d1 = quotient_deriv(f, sym::v_z1);
    FNode d2 = quotient_deriv(f, sym::v_z2);
    return {sub(mul(d1.num, n_R), mul(n_P, d2.num)), f.p + 2, f.q + 1};
  }

  FNode apply_conj(const FNode& f) {
    FNode d1 = quotient_deriv(f, sym::v_z1b);
    FNode d2 = quotient_deriv(f, sym::v_z2b);
    return {sub(mul(d1.num, n_Rc), mul(n_Pc, d2.num)), f.p + 1, f.q + 2};
  }

  Impl(sym::Poly r_in, int m_in, sym::IteratedOrder ord) : r(std::move(r_in)), order(ord), m(m_in) {
    if (m < 2) fail(ErrorCode::invalid_argument, "coefficient engine needs m >= 2");
    nodes.push_back({Node::k_zero, cplx(0.0, 0.0), -1, -1, -1});  // id 0

    n_P = leaf({1, 0, 0, 0});
    n_Pc = leaf({0, 1, 0, 0});
    n_R = leaf({0, 0, 1, 0});
    n_Rc = leaf({0, 0, 0, 1});
    if (n_R == 0)
      fail(ErrorCode::degenerate_boundary_point,
           "frame denominator dr/dz2 is identically zero; rotate the chart first");
    r_scale = std::max(1.0, deriv_poly({0, 0, 1, 0}).max_abs_coeff());

    int r11 = leaf({1, 1, 0, 0});
    int r12 = leaf({1, 0, 0, 1});
    int r21 = leaf({0, 1, 1, 0});
    int r22 = leaf({0, 0, 1, 1});
    int levi = add(sub(sub(mul(r11, mul(n_R, n_Rc)), mul(n_Pc, mul(r12, n_R))),
                       mul(n_P, mul(r21, n_Rc))),
                   mul(n_P, mul(n_Pc, r22)));

    // family[a][b]: a plain-field and b conjugate-field applications
    int span = m - 1;
    std::vector<std::vector<FNode>> fam(span, std::vector<FNode>(span, FNode{0, 0, 0}));
    fam[0][0] = {levi, 1, 1};
    if (order == sym::IteratedOrder::l1_outermost) {
      for (int b = 1; b < span; ++b) fam[0][b] = apply_conj(fam[0][b - 1]);
      for (int a = 1; a < span; ++a)
        for (int b = 0; a + b < span; ++b) fam[a][b] = apply_plain(fam[a - 1][b]);
    } else {
      for (int a = 1; a < span; ++a) fam[a][0] = apply_plain(fam[a - 1][0]);
      for (int b = 1; b < span; ++b)
        for (int a = 0; a + b < span; ++a) fam[a][b] = apply_conj(fam[a][b - 1]);
    }
    for (int l = 2; l <= m; ++l) {
      for (auto [j, k] : CoeffEngine::jk_pairs(l)) {
        FNode f = fam[j - 1][k - 1];
        roots.push_back({j, k, f.num, f.p, f.q});
      }
    }
    expanded.resize(std::size_t(m) + 1);
    expanded_built.assign(std::size_t(m) + 1, false);

    // Construction leaves dead intermediates behind (simplified-away branches);
    // keep only what the roots and the frame quantities reach.
    std::vector<char> live(nodes.size(), 0);
    std::vector<int> stack = {n_P, n_Pc, n_R, n_Rc};
    for (const Root& rt : roots) stack.push_back(rt.num);
    while (!stack.empty()) {
      int id = stack.back();
      stack.pop_back();
      if (id < 0 || live[id]) continue;
      live[id] = 1;
      const Node& n = nodes[id];
      if (n.kind == Node::k_add || n.kind == Node::k_sub || n.kind == Node::k_mul) {
        stack.push_back(n.a);
        stack.push_back(n.b);
      }
    }
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (live[i]) eval_order.push_back(int(i));

    leaf_terms.resize(leaf_polys.size());
    for (std::size_t i = 0; i < leaf_polys.size(); ++i) {
      for (const auto& mono : leaf_polys[i].terms()) {
        leaf_terms[i].push_back({mono.e[0], mono.e[1], mono.e[2], mono.e[3], mono.c});
        for (int v = 0; v < 4; ++v) max_pow = std::max(max_pow, int(mono.e[v]));
      }
    }
  }

  sym::Poly poly_of(int node, std::map<int, sym::Poly>& memo) const {
    auto it = memo.find(node);
    if (it != memo.end()) return it->second;
    const Node& n = nodes[node];
    sym::Poly out;
    switch (n.kind) {
      case Node::k_zero:
        break;
      case Node::k_const:
        out = sym::Poly(n.cval);
        break;
      case Node::k_leaf:
        out = leaf_polys[n.leaf_idx];
        break;
      case Node::k_add:
        out = poly_of(n.a, memo) + poly_of(n.b, memo);
        break;
      case Node::k_sub:
        out = poly_of(n.a, memo) - poly_of(n.b, memo);
        break;
      case Node::k_mul:
        out = poly_of(n.a, memo) * poly_of(n.b, memo);
        break;
    }
    memo.emplace(node, out);
    return out;
  }
};

CoeffEngine::CoeffEngine(sym::Poly r, int m, sym::IteratedOrder order)
    : impl_(std::make_unique<Impl>(std::move(r), m, order)), m_(m) {}
CoeffEngine::~CoeffEngine() = default;
CoeffEngine::CoeffEngine(CoeffEngine&&) noexcept = default;

std::vector<std::pair<int, int>> CoeffEngine::jk_pairs(int l) {
  std::vector<std::pair<int, int>> out;
  for (int j = 1; j < l; ++j) out.emplace_back(j, l - j);
  return out;
}

const sym::Poly& CoeffEngine::poly() const { return impl_->r; }

cplx CoeffEngine::eval_r(const C2& w) const { return impl_->r.eval(w); }

CoeffEngine::PointValues CoeffEngine::eval(const C2& w) const {
  const Impl& im = *impl_;

  // power tables for the four tape arguments
  static thread_local std::vector<cplx> pows;
  const int np = im.max_pow + 1;
  pows.resize(std::size_t(np) * 4);
  cplx* pw[4] = {pows.data(), pows.data() + np, pows.data() + 2 * np, pows.data() + 3 * np};
  const std::array<cplx, 4> vals = {w.z1, std::conj(w.z1), w.z2, std::conj(w.z2)};
  for (int v = 0; v < 4; ++v) {
    pw[v][0] = cplx(1.0, 0.0);
    for (int e = 1; e < np; ++e) pw[v][e] = pw[v][e - 1] * vals[v];
  }

  // evaluate live nodes in creation order (children precede parents)
  static thread_local std::vector<cplx> buf;
  buf.resize(im.nodes.size());
  buf[0] = cplx(0.0, 0.0);
  for (int i : im.eval_order) {
    const Node& n = im.nodes[i];
    switch (n.kind) {
      case Node::k_zero:
        buf[i] = cplx(0.0, 0.0);
        break;
      case Node::k_const:
        buf[i] = n.cval;
        break;
      case Node::k_leaf: {
        cplx acc(0.0, 0.0);
        for (const Impl::LeafTerm& t : im.leaf_terms[n.leaf_idx])
          acc += t.coeff * (pw[0][t.a] * pw[1][t.b] * (pw[2][t.c] * pw[3][t.d]));
        buf[i] = acc;
        break;
      }
      case Node::k_add:
        buf[i] = buf[n.a] + buf[n.b];
        break;
      case Node::k_sub:
        buf[i] = buf[n.a] - buf[n.b];
        break;
      case Node::k_mul:
        buf[i] = buf[n.a] * buf[n.b];
        break;
    }
  }

  PointValues out;
  out.c.fill(0.0);
  out.r_z1 = buf[im.n_P];
  out.r_z2 = buf[im.n_R];
  double aR = std::abs(buf[im.n_R]);
  double aRc = std::abs(buf[im.n_Rc]);
  if (aR < 1e-12 * im.r_scale)
    fail(ErrorCode::pole_proximity, "chart frame degenerate: dr/dz2 vanishes at evaluation point");
  double g = std::sqrt(std::norm(buf[im.n_P]) + std::norm(buf[im.n_R]));
  out.frame_ratio = aR / (2.0 * g);

  for (const Impl::Root& rt : im.roots) {
    double den = 1.0;
    for (int i = 0; i < rt.p; ++i) den *= aR;
    for (int i = 0; i < rt.q; ++i) den *= aRc;
    double v = std::abs(buf[rt.num]) / den;
    int l = rt.j + rt.k;
    if (l < int(out.c.size())) out.c[l] = std::max(out.c[l], v);
  }
  return out;
}

const std::vector<sym::RationalExpr>& CoeffEngine::expanded_level(int l) const {
  if (l < 2 || l > m_) fail(ErrorCode::invalid_argument, "coefficient level out of range");
  Impl& im = *impl_;
  std::lock_guard<std::mutex> lock(im.expand_mutex);
  if (!im.expanded_built[l]) {
    std::map<int, sym::Poly> memo;
    std::vector<sym::RationalExpr> exprs;
    for (const Impl::Root& rt : im.roots) {
      if (rt.j + rt.k != l) continue;
      sym::Poly num = im.poly_of(rt.num, memo);
      sym::Poly den = sym::pow(im.deriv_poly_cache.at({0, 0, 1, 0}), rt.p) *
                      sym::pow(im.deriv_poly_cache.at({0, 0, 0, 1}), rt.q);
      exprs.emplace_back(std::move(num), std::move(den));
    }
    im.expanded[l] = std::move(exprs);
    im.expanded_built[l] = true;
  }
  return im.expanded[l];
}

ChartFrame build_chart_frame(const sym::Poly& r, const C2& boundary_point, const C2& unit_normal,
                             int m, double initial_radius, sym::IteratedOrder order) {
  ChartFrame f;
  f.center = boundary_point;
  f.rot = rotation_to_normal(unit_normal);
  f.rot_adj = adjoint(f.rot);
  f.m_type = m;
  sym::Poly rotated = r.substitute_linear(f.rot_adj);
  f.engine = std::make_shared<CoeffEngine>(std::move(rotated), m, order);

  C2 wc = f.to_chart(boundary_point);
  double rad = initial_radius;
  while (true) {
    if (rad < 1e-3)
      fail(ErrorCode::chart_invalid,
           "chart invalid: frame denominator not bounded below on any usable ball");
    bool ok = true;
    R4Seq seq;
    int accepted = 0;
    while (accepted < 200) {
      auto u = seq.next();
      double x[4];
      double n2 = 0.0;
      for (int i = 0; i < 4; ++i) {
        x[i] = 2.0 * u[i] - 1.0;
        n2 += x[i] * x[i];
      }
      if (n2 > 1.0) continue;
      ++accepted;
      C2 w(wc.z1 + cplx(x[0], x[1]) * rad, wc.z2 + cplx(x[2], x[3]) * rad);
      try {
        if (f.engine->eval(w).frame_ratio < 0.1) {
          ok = false;
          break;
        }
      } catch (const Error&) {
        ok = false;
        break;
      }
    }
    if (ok) break;
    rad *= 0.5;
  }
  f.radius = rad;
  return f;
}

}  // namespace finsler::chart
