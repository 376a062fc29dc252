#include "finslerlab/geodesics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <utility>

#include "finslerlab/errors.hpp"

namespace finsler::geodesics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Depth below which endpoint pairs are routed through normal-fiber legs; the
// barrier conditioning degrades as delta -> 0.
constexpr double kFiberRouteDepth = 1e-4;

C2 bump(const C2& p, int coord, double s) {
  auto a = p.array();
  a[coord] += s;
  return C2::from_array(a.data());
}

std::vector<C2> polyline(const C2& x, const C2& y, int segments) {
  std::vector<C2> w;
  w.reserve(static_cast<std::size_t>(segments) + 1);
  for (int i = 0; i <= segments; ++i) {
    double t = static_cast<double>(i) / segments;
    w.push_back(x + (y - x) * t);
  }
  w.front() = x;
  w.back() = y;  // exact endpoints, not x + (y - x) rounded
  return w;
}

// Midpoint-rule length of one segment with adaptive bisection: halving an
// interval cuts the midpoint error about fourfold, so |two - whole| / 3
// estimates the refined error and intervals split until their share of the
// relative budget is met. Near-boundary integrands (~1/delta) concentrate the
// points where they are needed instead of refining the whole segment. Every
// quadrature point is interiority-checked so band metrics (which do not
// self-check) cannot silently integrate through the boundary.
double segment_length(const metrics::FinslerMetric& metric, const domain::Domain& dom, const C2& a,
                      const C2& b, double tol, std::size_t seg_index, double* tail) {
  C2 d = b - a;
  if (norm2(d) == 0.0) return 0.0;
  auto f = [&](double t) {
    C2 p = a + d * t;
    if (!dom.inside(p))
      fail(ErrorCode::path_exits_domain,
           "path exits the domain inside segment " + std::to_string(seg_index));
    return metric.eval(p, d);
  };
  try {
    double rough =
        0.25 * (f(0.125) + f(0.375) + f(0.625) + f(0.875));
    double budget = tol * std::max(std::abs(rough), 1e-300);

    struct Node {
      double t0, t1, fm, tol;
    };
    std::vector<Node> stack;
    stack.push_back({0.0, 1.0, f(0.5), budget});
    double total = 0.0;
    double err = 0.0;
    int nodes = 0;
    while (!stack.empty()) {
      Node n = stack.back();
      stack.pop_back();
      ++nodes;
      double len = n.t1 - n.t0;
      double m = 0.5 * (n.t0 + n.t1);
      double fl = f(0.5 * (n.t0 + m));
      double fr = f(0.5 * (m + n.t1));
      double whole = n.fm * len;
      double two = 0.5 * (fl + fr) * len;
      double e = std::abs(two - whole) / 3.0;
      if (e <= n.tol || len < 1e-7 || nodes > 20000) {
        total += two + (two - whole) / 3.0;
        err += e;
      } else {
        stack.push_back({m, n.t1, fr, 0.5 * n.tol});
        stack.push_back({n.t0, m, fl, 0.5 * n.tol});
      }
    }
    if (tail) *tail += err;
    return total;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::path_exits_domain) throw;
    fail(e.code(), "metric evaluation failed on segment " + std::to_string(seg_index) + ": " +
                       e.what());
  }
}

// Pattern descent over interior waypoints. Endpoints are fixed; the objective
// is a fixed coarse midpoint quadrature plus a log-barrier on the defining
// function. Per-segment costs are cached so a waypoint trial re-evaluates only
// its two incident segments.
struct Descent {
  const metrics::FinslerMetric& metric;
  const domain::Domain& dom;
  int nq;
  double mu;
  std::vector<C2> w;
  std::vector<double> segc;
  std::vector<double> barr;

  Descent(const metrics::FinslerMetric& m, const domain::Domain& d, int quad, double mu0)
      : metric(m), dom(d), nq(quad), mu(mu0) {}

  double seg_cost(const C2& a, const C2& b) const {
    C2 d = b - a;
    if (norm2(d) == 0.0) return 0.0;
    double s = 0.0;
    for (int i = 0; i < nq; ++i) {
      C2 p = a + d * ((i + 0.5) / nq);
      if (!(dom.defining_value(p) < 0.0)) return kInf;
      try {
        s += metric.eval(p, d);
      } catch (const Error&) {
        return kInf;
      }
    }
    return s / nq;
  }

  double barrier(const C2& p) const {
    double r = dom.defining_value(p);
    return r < 0.0 ? -std::log(-r) : kInf;
  }

  // Rebuilds the caches; false when any segment or waypoint is infeasible.
  bool load(std::vector<C2> points) {
    w = std::move(points);
    segc.assign(w.size() - 1, 0.0);
    barr.assign(w.size(), 0.0);
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      segc[i] = seg_cost(w[i], w[i + 1]);
      if (!std::isfinite(segc[i])) return false;
    }
    for (std::size_t i = 1; i + 1 < w.size(); ++i) {
      barr[i] = barrier(w[i]);
      if (!std::isfinite(barr[i])) return false;
    }
    return true;
  }

  double coarse_length() const {
    double s = 0.0;
    for (double v : segc) s += v;
    return s;
  }

  bool sweep(double step) {
    bool improved = false;
    for (std::size_t i = 1; i + 1 < w.size(); ++i) {
      double base = segc[i - 1] + segc[i] + mu * barr[i];
      for (int c = 0; c < 4; ++c) {
        for (double s : {step, -step}) {
          C2 wt = bump(w[i], c, s);
          double b = barrier(wt);
          if (!std::isfinite(b)) continue;
          double s1 = seg_cost(w[i - 1], wt);
          if (!std::isfinite(s1)) continue;
          double s2 = seg_cost(wt, w[i + 1]);
          if (!std::isfinite(s2)) continue;
          double cand = s1 + s2 + mu * b;
          if (cand < base - 1e-15 * (1.0 + std::abs(base))) {
            w[i] = wt;
            segc[i - 1] = s1;
            segc[i] = s2;
            barr[i] = b;
            base = cand;
            improved = true;
            break;
          }
        }
      }
    }
    return improved;
  }

  void run(int max_iters, double step0) {
    double step = step0;
    int it = 0;
    while (it < max_iters && step > step0 * 1e-3) {
      if (!sweep(step)) step *= 0.6;
      ++it;
    }
  }
};

// Midpoint that stays interior: straight midpoint, pulled toward the domain
// witness when a non-convex boundary cuts it off.
C2 interior_midpoint(const domain::Domain& dom, const C2& a, const C2& b) {
  C2 mid = (a + b) * 0.5;
  if (dom.inside(mid)) return mid;
  C2 wp = dom.witness();
  for (int k = 1; k <= 12; ++k) {
    double t = std::pow(2.0, -12 + k);  // smallest pull first
    C2 cand = mid + (wp - mid) * t;
    if (dom.inside(cand)) return cand;
  }
  return wp;
}

std::vector<C2> insert_midpoints(const domain::Domain& dom, const std::vector<C2>& w) {
  std::vector<C2> out;
  out.reserve(w.size() * 2 - 1);
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    out.push_back(w[i]);
    out.push_back(interior_midpoint(dom, w[i], w[i + 1]));
  }
  out.push_back(w.back());
  return out;
}

struct Measured {
  Path path;
  double tail = 0.0;
};

Measured measure(const metrics::FinslerMetric& metric, std::vector<C2> points, double quad_tol) {
  Measured m;
  m.path.waypoints = std::move(points);
  path_length(metric, m.path, quad_tol, &m.tail);
  return m;
}

// Straight chord as a competitor when it stays interior; keeps the reported
// value at or below every feasible chord. A positive gate skips the full
// measurement when a 16-point surrogate already exceeds it: the surrogate
// undershoots the true chord length by far less than the 1.5x margin callers
// pass, so a skipped chord cannot have been the winner.
std::optional<Measured> measured_chord(const metrics::FinslerMetric& metric, const C2& x,
                                       const C2& y, double quad_tol, double gate = 0.0) {
  Measured m;
  m.path.waypoints = polyline(x, y, 16);
  try {
    if (gate > 0.0) {
      const domain::Domain& dom = *metric.dom();
      double quick = 0.0;
      for (std::size_t i = 0; i + 1 < m.path.waypoints.size(); ++i) {
        C2 a = m.path.waypoints[i];
        C2 d = m.path.waypoints[i + 1] - a;
        C2 p = a + d * 0.5;
        if (!dom.inside(p)) return std::nullopt;
        quick += metric.eval(p, d);
      }
      if (quick > gate) return std::nullopt;
    }
    path_length(metric, m.path, quad_tol, &m.tail);
  } catch (const Error&) {
    return std::nullopt;
  }
  return m;
}

// Free-space optimizer for endpoints at healthy depth. Restarts descend at the
// initial segment count; only the best survivor is refined by doubling.
DistanceResult free_geodesic(const metrics::MetricPtr& metric, const C2& x, const C2& y,
                             const GeodesicOptions& opts) {
  const domain::Domain& dom = *metric->dom();
  int n0 = std::max(2, opts.waypoints);
  double exy = dist(x, y);

  std::vector<std::vector<C2>> inits;
  inits.push_back(polyline(x, y, n0));
  int arcs = std::max(opts.restarts - 1, 0);
  if (arcs == 0) arcs = 1;  // arc rescue stays available when the chord exits
  C2 inward;
  {
    C2 mid = (x + y) * 0.5;
    if (dom.inside(mid)) {
      inward = dom.collar_probe(mid).normal;
    } else {
      C2 nx = dom.collar_probe(x).normal;
      C2 ny = dom.collar_probe(y).normal;
      C2 avg = (nx + ny) * 0.5;
      double na = norm(avg);
      inward = na > 1e-12 ? avg * (1.0 / na) : nx;
    }
  }
  double lam_max = 0.5 * std::min(exy, dom.collar());
  for (int j = 0; j < arcs; ++j) {
    double lam = lam_max / std::pow(2.0, j);
    std::vector<C2> arc = polyline(x, y, n0);
    for (int i = 0; i <= n0; ++i) {
      double t = static_cast<double>(i) / n0;
      arc[i] = arc[i] - inward * (lam * 4.0 * t * (1.0 - t));
    }
    inits.push_back(std::move(arc));
  }

  int nq = std::max(1, opts.descent_quad);
  double mu0 = 0.0;  // set from the first feasible init
  std::vector<C2> best_pts;
  double best_len = kInf;
  for (std::size_t k = 0; k < inits.size(); ++k) {
    bool rescue_only = opts.restarts <= 1 && k > 0;
    if (rescue_only && !best_pts.empty()) continue;  // arcs only rescue a failed chord
    Descent d(*metric, dom, nq, 0.0);
    std::vector<C2> seed = inits[k];
    bool ok = d.load(seed);
    // infeasible arcs shrink toward the chord until they fit
    for (int half = 0; !ok && k > 0 && half < 8; ++half) {
      for (int i = 0; i <= n0; ++i) {
        double t = static_cast<double>(i) / n0;
        C2 chord_pt = x + (y - x) * t;
        seed[i] = chord_pt + (seed[i] - chord_pt) * 0.5;
      }
      ok = d.load(seed);
    }
    if (!ok) continue;
    if (mu0 == 0.0) mu0 = 1e-3 * std::max(d.coarse_length(), 1e-12) / std::max(n0 - 1, 1);
    d.mu = mu0;
    d.run(opts.max_iters, 0.25 * exy / n0);
    double len = d.coarse_length();
    if (best_pts.empty() || len < best_len) {
      best_pts = d.w;
      best_len = len;
    }
  }
  if (best_pts.empty())
    fail(ErrorCode::no_feasible_initialization,
         "no feasible initialization: the chord exits the domain and inward arcs failed");

  Descent ref(*metric, dom, nq, mu0);
  ref.load(best_pts);
  Measured rep = measure(*metric, ref.w, opts.quad_tol);
  Measured best_rep = rep;
  double last_delta = 0.0;
  int n_cur = n0;
  while (2 * n_cur <= opts.max_waypoints) {
    std::vector<C2> refined = insert_midpoints(dom, ref.w);
    ref.mu *= 0.5;
    if (!ref.load(std::move(refined))) break;  // midpoint rescue failed; keep coarse answer
    n_cur *= 2;
    ref.run(opts.max_iters, 0.25 * exy / n_cur);
    Measured next = measure(*metric, ref.w, opts.quad_tol);
    last_delta = std::abs(next.path.finsler_length - rep.path.finsler_length);
    if (next.path.finsler_length < best_rep.path.finsler_length) best_rep = next;
    bool converged = last_delta < opts.tol * std::max(next.path.finsler_length, 1e-12);
    rep = std::move(next);
    if (converged) break;
  }

  // the chord is always an admissible competitor when it fits; keeping the min
  // makes the optimizer <= chord_upper invariant structural
  if (auto chord =
          measured_chord(*metric, x, y, opts.quad_tol, 1.5 * best_rep.path.finsler_length);
      chord && chord->path.finsler_length < best_rep.path.finsler_length)
    best_rep = std::move(*chord);

  DistanceResult res;
  res.value = best_rep.path.finsler_length;
  res.path = std::move(best_rep.path);
  res.method = Method::optimizer;
  // three error sources: the unfinished N-refinement, the quadrature tail, and
  // the bias from descending on the coarse surrogate instead of the true length
  double surrogate_gap = std::abs(ref.coarse_length() - rep.path.finsler_length);
  res.error_estimate = 3.0 * last_delta + best_rep.tail + surrogate_gap;
  return res;
}

// Fiber leg from a shallow endpoint down to the target depth: geometric depth
// ladder along the boundary normal, shallow end first.
std::vector<C2> fiber_leg(const C2& z, const domain::CollarProbe& probe, double target_depth) {
  C2 foot = z + probe.normal * probe.delta;
  int k = static_cast<int>(std::ceil(std::log2(target_depth / probe.delta)));
  k = std::clamp(k, 2, 24);
  std::vector<C2> leg;
  leg.reserve(static_cast<std::size_t>(k) + 1);
  for (int j = 0; j <= k; ++j) {
    double depth = probe.delta * std::pow(target_depth / probe.delta, static_cast<double>(j) / k);
    leg.push_back(foot - probe.normal * depth);
  }
  leg.front() = z;
  return leg;
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::optimizer: return "optimizer";
    case Method::grid_oracle: return "grid_oracle";
    case Method::fiber_exact: return "fiber_exact";
    case Method::chord_upper: return "chord_upper";
  }
  return "unknown";
}

GeodesicOptions GeodesicOptions::fast_profile() {
  GeodesicOptions o;
  o.waypoints = 6;
  o.restarts = 1;
  o.max_iters = 12;
  o.tol = 2e-3;
  o.quad_tol = 1e-4;
  o.descent_quad = 1;
  o.max_waypoints = 6;  // no refinement pass; the surrogate gap carries the error
  o.run_oracle = false;
  return o;
}

void validate_path(const domain::Domain& dom, Path& path) {
  if (path.waypoints.size() < 2)
    fail(ErrorCode::invalid_argument, "a path needs at least two waypoints");
  double euclid = 0.0;
  double hmax = 0.0;
  auto depth = [&](const C2& p, std::size_t seg) {
    if (!dom.inside(p))
      fail(ErrorCode::path_exits_domain,
           "path exits the domain inside segment " + std::to_string(seg));
    hmax = std::max(hmax, dom.collar_probe(p).delta);
  };
  depth(path.waypoints[0], 0);
  for (std::size_t i = 0; i + 1 < path.waypoints.size(); ++i) {
    const C2& a = path.waypoints[i];
    const C2& b = path.waypoints[i + 1];
    euclid += dist(a, b);
    for (int s = 1; s <= 8; ++s) depth(a + (b - a) * (s / 9.0), i);
    depth(b, i);
  }
  path.euclid_length = euclid;
  path.H = hmax;
}

double path_length(const metrics::FinslerMetric& metric, Path& path, double quad_tol,
                   double* quad_tail) {
  const domain::Domain& dom = *metric.dom();
  validate_path(dom, path);
  double total = 0.0;
  double tail = 0.0;
  for (std::size_t i = 0; i + 1 < path.waypoints.size(); ++i)
    total += segment_length(metric, dom, path.waypoints[i], path.waypoints[i + 1], quad_tol, i,
                            &tail);
  path.finsler_length = total;
  if (quad_tail) *quad_tail = tail;
  return total;
}

DistanceResult geodesic(const metrics::MetricPtr& metric, const C2& x, const C2& y,
                        const GeodesicOptions& opts) {
  const domain::Domain& dom = *metric->dom();
  if (!dom.inside(x) || !dom.inside(y))
    fail(ErrorCode::invalid_argument, "geodesic endpoints must be interior points");
  if (dist(x, y) == 0.0) {
    DistanceResult res;
    res.path.waypoints = {x, y};
    res.path.H = dom.collar_probe(x).delta;
    res.method = Method::optimizer;
    return res;
  }

  domain::CollarProbe px = dom.collar_probe(x);
  domain::CollarProbe py = dom.collar_probe(y);
  DistanceResult res;
  if (std::min(px.delta, py.delta) < kFiberRouteDepth) {
    // fiber legs to half the collar depth, free optimization in between
    double d0 = 0.5 * dom.collar();
    std::vector<C2> pre, post;
    C2 ix = x, iy = y;
    if (px.delta < d0) {
      pre = fiber_leg(x, px, d0);
      ix = pre.back();
    }
    if (py.delta < d0) {
      post = fiber_leg(y, py, d0);
      iy = post.back();
    }
    std::vector<C2> stitched;
    if (!pre.empty()) stitched.insert(stitched.end(), pre.begin(), pre.end());
    DistanceResult middle;
    double middle_err = 0.0;
    if (dist(ix, iy) > 1e-12) {
      middle = free_geodesic(metric, ix, iy, opts);
      middle_err = middle.error_estimate;
      const auto& mw = middle.path.waypoints;
      std::size_t from = stitched.empty() ? 0 : 1;
      stitched.insert(stitched.end(), mw.begin() + from, mw.end());
    } else if (stitched.empty()) {
      stitched.push_back(ix);
    }
    if (!post.empty()) {
      std::size_t skip = stitched.empty() ? 0 : 1;
      stitched.insert(stitched.end(), post.rbegin() + skip, post.rend());
    }
    if (stitched.size() < 2) stitched.push_back(y);
    Measured whole = measure(*metric, std::move(stitched), opts.quad_tol);
    // same-fiber shallow pairs: the straight chord undercuts the fiber detour
    if (auto chord = measured_chord(*metric, x, y, opts.quad_tol,
                                    1.5 * whole.path.finsler_length);
        chord && chord->path.finsler_length < whole.path.finsler_length)
      whole = std::move(*chord);
    res.value = whole.path.finsler_length;
    res.path = std::move(whole.path);
    res.method = Method::optimizer;
    res.error_estimate = middle_err + whole.tail;
  } else {
    res = free_geodesic(metric, x, y, opts);
  }

  if (opts.run_oracle) {
    DistanceResult oracle = grid_oracle_distance(metric, x, y, 0.0);
    res.error_estimate += std::max(0.0, res.value - oracle.value);
    if (oracle.value < res.value) {
      // the lattice found a shorter route; its path is admissible, keep it
      res.value = oracle.value;
      res.path = std::move(oracle.path);
    }
  }
  return res;
}

DistanceResult grid_oracle_distance(const metrics::MetricPtr& metric, const C2& x, const C2& y,
                                    double h, std::size_t node_budget) {
  const domain::Domain& dom = *metric->dom();
  if (!dom.inside(x) || !dom.inside(y))
    fail(ErrorCode::invalid_argument, "grid oracle endpoints must be interior points");
  double exy = dist(x, y);
  if (exy == 0.0) {
    DistanceResult res;
    res.path.waypoints = {x, y};
    res.path.H = dom.collar_probe(x).delta;
    res.method = Method::grid_oracle;
    return res;
  }
  double dmin = std::min(dom.collar_probe(x).delta, dom.collar_probe(y).delta);
  if (h <= 0.0) {
    double reach = dom.bounding_radius() + norm(x);
    double h_budget = 2.2 * reach / std::sqrt(static_cast<double>(node_budget));
    h = std::max(std::min(exy / 24.0, 1.5 * dmin), h_budget);
  }
  if (!(dmin > 0.5 * h))
    fail(ErrorCode::endpoints_not_connectable,
         "endpoints not connectable at this resolution: boundary distance at or below h/2");

  // align the lattice so both endpoints are exact nodes
  int ay = std::max(1, static_cast<int>(std::llround(exy / h)));
  double hs = exy / ay;
  C2 u1 = (y - x) * (1.0 / exy);
  auto point_at = [&](int a, int b) { return x + u1 * cplx(a * hs, b * hs); };

  int amax = static_cast<int>(std::floor((dom.bounding_radius() + norm(x)) / hs)) + 2;
  std::int64_t width = 2 * static_cast<std::int64_t>(amax) + 1;
  if (width * width > static_cast<std::int64_t>(node_budget))
    fail(ErrorCode::invalid_argument, "grid oracle node budget exceeded at this resolution");

  std::vector<std::int32_t> idmap(static_cast<std::size_t>(width * width), -2);
  std::vector<std::pair<int, int>> coords;
  std::vector<double> best;
  std::vector<std::int32_t> parent;
  std::vector<char> done;
  auto slot = [&](int a, int b) {
    return static_cast<std::size_t>(a + amax) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(b + amax);
  };
  auto admit = [&](int a, int b) -> std::int32_t {
    if (std::abs(a) > amax || std::abs(b) > amax) return -1;
    std::size_t s = slot(a, b);
    if (idmap[s] != -2) return idmap[s];
    C2 p = point_at(a, b);
    bool ok = dom.inside(p) && dom.collar_probe(p).delta > 0.5 * hs;
    if (!ok) {
      idmap[s] = -1;
      return -1;
    }
    idmap[s] = static_cast<std::int32_t>(coords.size());
    coords.emplace_back(a, b);
    best.push_back(kInf);
    parent.push_back(-1);
    done.push_back(0);
    return idmap[s];
  };

  std::int32_t start = admit(0, 0);
  std::int32_t target = admit(ay, 0);
  if (start < 0 || target < 0)
    fail(ErrorCode::endpoints_not_connectable, "endpoints not connectable at this resolution");

  using HeapItem = std::pair<double, std::int32_t>;
  std::priority_queue<HeapItem, std::vector<HeapItem>, std::greater<HeapItem>> heap;
  best[static_cast<std::size_t>(start)] = 0.0;
  heap.emplace(0.0, start);
  static const int kMoves[8][2] = {{1, 0}, {-1, 0}, {0, 1},  {0, -1},
                                   {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  double dijkstra_value = kInf;
  while (!heap.empty()) {
    auto [du, u] = heap.top();
    heap.pop();
    std::size_t ui = static_cast<std::size_t>(u);
    if (done[ui]) continue;
    done[ui] = 1;
    if (u == target) {
      dijkstra_value = du;
      break;
    }
    auto [ua, ub] = coords[ui];
    C2 pu = point_at(ua, ub);
    for (const auto& mv : kMoves) {
      std::int32_t v = admit(ua + mv[0], ub + mv[1]);
      if (v < 0 || done[static_cast<std::size_t>(v)]) continue;
      C2 pv = point_at(ua + mv[0], ub + mv[1]);
      C2 mid = (pu + pv) * 0.5;
      if (!dom.inside(mid)) continue;
      double w;
      try {
        w = metric->eval(mid, pv - pu);
      } catch (const Error&) {
        continue;
      }
      if (!std::isfinite(w)) continue;
      std::size_t vi = static_cast<std::size_t>(v);
      if (du + w < best[vi]) {
        best[vi] = du + w;
        parent[vi] = u;
        heap.emplace(best[vi], v);
      }
    }
  }
  if (!std::isfinite(dijkstra_value))
    fail(ErrorCode::endpoints_not_connectable, "endpoints not connectable at this resolution");

  std::vector<C2> wps;
  for (std::int32_t c = target; c >= 0; c = parent[static_cast<std::size_t>(c)])
    wps.push_back(point_at(coords[static_cast<std::size_t>(c)].first,
                           coords[static_cast<std::size_t>(c)].second));
  std::reverse(wps.begin(), wps.end());
  wps.front() = x;
  wps.back() = y;

  Measured m = measure(*metric, std::move(wps), 1e-6);
  DistanceResult res;
  res.value = m.path.finsler_length;
  res.path = std::move(m.path);
  res.method = Method::grid_oracle;
  res.error_estimate = std::abs(dijkstra_value - res.value) + m.tail;
  return res;
}

DistanceResult fiber_distance(const domain::DomainPtr& dom, const C2& x, const C2& y) {
  if (!dom->inside(x) || !dom->inside(y))
    fail(ErrorCode::invalid_argument, "fiber distance needs interior points");
  DistanceResult res;
  res.method = Method::fiber_exact;
  res.path.waypoints = {x, y};
  res.path.euclid_length = dist(x, y);
  domain::CollarProbe px = dom->collar_probe(x);
  domain::CollarProbe py = dom->collar_probe(y);
  res.path.H = std::max(px.delta, py.delta);
  if (dist(x, y) == 0.0) return res;
  C2 fx = x + px.normal * px.delta;
  C2 fy = y + py.normal * py.delta;
  if (dist(fx, fy) >= 1e-6) fail(ErrorCode::not_on_common_fiber, "not on a common fiber");
  res.value = std::abs(std::log(py.delta / px.delta));
  res.path.finsler_length = res.value;
  return res;
}

DistanceResult chord_upper(const metrics::MetricPtr& metric, const C2& x, const C2& y,
                           double quad_tol) {
  const domain::Domain& dom = *metric->dom();
  if (!dom.inside(x) || !dom.inside(y))
    fail(ErrorCode::invalid_argument, "chord endpoints must be interior points");
  Path path;
  path.waypoints = polyline(x, y, 16);
  DistanceResult res;
  try {
    double tail = 0.0;
    path_length(*metric, path, quad_tol, &tail);
    res.error_estimate = tail;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::path_exits_domain)
      fail(ErrorCode::path_exits_domain, "chord exits the domain");
    throw;
  }
  res.value = path.finsler_length;
  res.path = std::move(path);
  res.method = Method::chord_upper;
  return res;
}

}  // namespace finsler::geodesics
