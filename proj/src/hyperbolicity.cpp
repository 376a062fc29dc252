#include "finslerlab/hyperbolicity.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "finslerlab/errors.hpp"
#include "finslerlab/rng.hpp"
#include "parallel.hpp"
#include "slide.hpp"

namespace finsler::hyperbolicity {

namespace {

double spread(const double* v, std::size_t n) {
  double lo = v[0], hi = v[0];
  for (std::size_t i = 1; i < n; ++i) {
    lo = std::min(lo, v[i]);
    hi = std::max(hi, v[i]);
  }
  return hi - lo;
}

// Product from raw table entries, clamped at the zero floor.
double product_of(double dxw, double dyw, double dxy) {
  return std::max(0.0, 0.5 * (dxw + dyw - dxy));
}

}  // namespace

DistanceFn optimizer_distance(const metrics::MetricPtr& metric,
                              const geodesics::GeodesicOptions& opts) {
  return [metric, opts](const C2& x, const C2& y) {
    return geodesics::geodesic(metric, x, y, opts);
  };
}

DistanceFn gauge_distance(const domain::DomainPtr& dom, int k) {
  return [dom, k](const C2& x, const C2& y) {
    geodesics::DistanceResult r;
    r.value = metrics::gauge_g(k, *dom, x, y);
    r.path.waypoints = {x, y};
    r.path.finsler_length = r.value;
    r.path.euclid_length = dist(x, y);
    r.error_estimate = 0.0;
    return r;
  };
}

std::size_t GromovSample::pair_index(std::size_t i, std::size_t j) const {
  if (i > j) std::swap(i, j);
  const std::size_t n = points.size();
  if (j >= n || i == j) fail(ErrorCode::invalid_argument, "bad pair index");
  return i * (2 * n - i - 1) / 2 + (j - i - 1);
}

double GromovSample::dist(std::size_t i, std::size_t j) const {
  if (i == j) return 0.0;
  return pair_dist[pair_index(i, j)];
}

double GromovSample::err(std::size_t i, std::size_t j) const {
  if (i == j) return 0.0;
  return pair_err[pair_index(i, j)];
}

double GromovSample::max_err() const {
  double m = 0.0;
  for (double e : base_err) m = std::max(m, e);
  for (double e : pair_err) m = std::max(m, e);
  return m;
}

GromovSample build_gromov_sample(const DistanceFn& dist, const C2& basepoint,
                                 const std::vector<C2>& points,
                                 unsigned threads) {
  GromovSample s;
  s.basepoint = basepoint;
  s.points = points;
  const std::size_t n = points.size();
  s.base_dist.assign(n, 0.0);
  s.base_err.assign(n, 0.0);
  const std::size_t npairs = n * (n - 1) / 2;
  s.pair_dist.assign(npairs, 0.0);
  s.pair_err.assign(npairs, 0.0);

  // Task t < n is the basepoint leg of point t; the rest are unordered pairs.
  // Each pair is computed once, so the table is symmetric by construction.
  struct PairId {
    std::size_t i, j;
  };
  std::vector<PairId> pairs;
  pairs.reserve(npairs);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.push_back({i, j});

  auto run_task = [&](std::size_t t) {
    if (t < n) {
      auto r = dist(points[t], basepoint);
      s.base_dist[t] = r.value;
      s.base_err[t] = r.error_estimate;
    } else {
      const PairId p = pairs[t - n];
      auto r = dist(s.points[p.i], s.points[p.j]);
      s.pair_dist[s.pair_index(p.i, p.j)] = r.value;
      s.pair_err[s.pair_index(p.i, p.j)] = r.error_estimate;
    }
  };

  detail::parallel_for(n + npairs, threads, run_task);
  return s;
}

GromovSample sample_from_table(std::vector<double> base_dist,
                               const std::vector<std::vector<double>>& pair_dist) {
  const std::size_t n = base_dist.size();
  if (pair_dist.size() != n)
    fail(ErrorCode::invalid_argument, "pair table size does not match the base row");
  GromovSample s;
  s.basepoint = C2(-1.0, 0.0, 0.0, 0.0);
  s.points.reserve(n);
  // Table-built samples have no geometry; points carry their index so prefix
  // slicing and diagnostics still work.
  for (std::size_t i = 0; i < n; ++i)
    s.points.push_back(C2(static_cast<double>(i), 0.0, 0.0, 0.0));
  s.base_dist = std::move(base_dist);
  s.base_err.assign(n, 0.0);
  s.pair_dist.assign(n * (n - 1) / 2, 0.0);
  s.pair_err.assign(s.pair_dist.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (pair_dist[i].size() != n)
      fail(ErrorCode::invalid_argument, "pair table is not square");
    if (pair_dist[i][i] != 0.0)
      fail(ErrorCode::invalid_argument, "pair table diagonal must be zero");
    for (std::size_t j = i + 1; j < n; ++j) {
      if (pair_dist[i][j] != pair_dist[j][i])
        fail(ErrorCode::invalid_argument, "pair table is not symmetric");
      s.pair_dist[s.pair_index(i, j)] = pair_dist[i][j];
    }
  }
  return s;
}

GromovSample prefix_sample(const GromovSample& s, std::size_t n) {
  if (n > s.size())
    fail(ErrorCode::invalid_argument, "prefix length exceeds the sample size");
  GromovSample p;
  p.basepoint = s.basepoint;
  p.points.assign(s.points.begin(), s.points.begin() + n);
  p.base_dist.assign(s.base_dist.begin(), s.base_dist.begin() + n);
  p.base_err.assign(s.base_err.begin(), s.base_err.begin() + n);
  p.pair_dist.assign(n * (n - 1) / 2, 0.0);
  p.pair_err.assign(p.pair_dist.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      p.pair_dist[p.pair_index(i, j)] = s.dist(i, j);
      p.pair_err[p.pair_index(i, j)] = s.err(i, j);
    }
  return p;
}

double gromov_product(const GromovSample& s, std::size_t i, std::size_t j) {
  const std::size_t n = s.size();
  const bool bi = (i == kBasepoint), bj = (j == kBasepoint);
  if ((!bi && i >= n) || (!bj && j >= n))
    fail(ErrorCode::invalid_argument, "sample index out of range");
  if (bi && bj) return 0.0;
  // (x|w)_w = 0 and (x|x)_w = d(x,w) both fall out of the formula exactly.
  const double dxw = bi ? 0.0 : s.base_dist[i];
  const double dyw = bj ? 0.0 : s.base_dist[j];
  const double dxy = (bi || bj) ? (bi ? dyw : dxw) : s.dist(i, j);
  return product_of(dxw, dyw, dxy);
}

double delta_estimate(const GromovSample& s, const DeltaOptions& opts) {
  const std::size_t n = s.size();
  if (n < 2) return 0.0;

  // Products are reused across triples, so build the full matrix first.
  std::vector<double> gp(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    gp[i * n + i] = s.base_dist[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = product_of(s.base_dist[i], s.base_dist[j], s.dist(i, j));
      gp[i * n + j] = v;
      gp[j * n + i] = v;
    }
  }

  double worst = 0.0;
  auto slack = [&](std::size_t x, std::size_t y, std::size_t z) {
    return std::min(gp[x * n + z], gp[z * n + y]) - gp[x * n + y];
  };
  if (n <= opts.full_enum_limit) {
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t z = 0; z < n; ++z)
          worst = std::max(worst, slack(x, y, z));
  } else {
    Rng rng(opts.seed);
    for (std::size_t t = 0; t < opts.subsample_triples; ++t) {
      const std::size_t x = rng.below(n), y = rng.below(n), z = rng.below(n);
      worst = std::max(worst, slack(x, y, z));
    }
  }
  return std::max(0.0, worst);
}

double visual_metric(double product, double eps) {
  return std::exp(-eps * product);
}

double visual_quasi_constant(const GromovSample& s, double eps,
                             const DeltaOptions& opts) {
  return std::exp(eps * delta_estimate(s, opts));
}

std::vector<double> default_depths(const domain::Domain& dom) {
  // 2^-k for seven consecutive k, starting at 4 but pushed deeper until the
  // ladder fits inside the validated collar.
  int k0 = 4;
  const double cap = 0.9 * dom.collar();
  while (std::ldexp(1.0, -k0) > cap && k0 < 40) ++k0;
  std::vector<double> depths;
  for (int k = k0; k < k0 + 7; ++k) depths.push_back(std::ldexp(1.0, -k));
  return depths;
}

BoundaryProductResult boundary_gromov_product(const DistanceFn& dist,
                                              const domain::DomainPtr& dom,
                                              const C2& a, const C2& b,
                                              const C2& omega,
                                              const std::vector<double>& depths,
                                              double fail_spread) {
  if (finsler::dist(a, b) == 0.0)
    fail(ErrorCode::invalid_argument,
         "boundary product needs two distinct boundary points");
  if (depths.empty())
    fail(ErrorCode::invalid_argument, "boundary product needs at least one depth");

  std::vector<double> ladder = depths;
  std::sort(ladder.begin(), ladder.end(), std::greater<double>());

  BoundaryProductResult out;
  out.depths = ladder;
  for (double t : ladder) {
    const C2 xt = dom->fiber_point(a, t);
    const C2 yt = dom->fiber_point(b, t);
    const double dxw = dist(xt, omega).value;
    const double dyw = dist(yt, omega).value;
    const double dxy = dist(xt, yt).value;
    out.sequence.push_back(product_of(dxw, dyw, dxy));
  }

  const std::size_t n = out.sequence.size();
  const std::size_t w = std::min<std::size_t>(3, n);
  out.value = out.sequence.back();
  out.error = spread(&out.sequence[n - w], w);
  if (n >= 4) {
    const double prev = spread(&out.sequence[n - w - 1], w);
    if (out.error > prev + 1e-12 && out.error > fail_spread) {
      char msg[160];
      std::snprintf(msg, sizeof msg,
                    "extrapolation failed: boundary product spread grows "
                    "(%.3g -> %.3g)",
                    prev, out.error);
      fail(ErrorCode::extrapolation_failed, msg);
    }
  }
  return out;
}

HolderFit holder_fit(const DistanceFn& dist, const domain::DomainPtr& dom,
                     const std::vector<std::pair<C2, C2>>& boundary_pairs,
                     const C2& omega, double visual_eps,
                     const std::vector<double>& depths) {
  if (boundary_pairs.size() < 20)
    fail(ErrorCode::invalid_argument,
         "holder fit needs at least 20 boundary pairs");

  HolderFit fit;
  fit.pair_count = boundary_pairs.size();
  fit.r_min = std::numeric_limits<double>::infinity();
  fit.r_max = 0.0;
  std::vector<double> sep;
  sep.reserve(boundary_pairs.size());
  for (const auto& [a, b] : boundary_pairs) {
    const double r = finsler::dist(a, b);
    sep.push_back(r);
    fit.r_min = std::min(fit.r_min, r);
    fit.r_max = std::max(fit.r_max, r);
  }
  if (!(fit.r_min > 0.0))
    fail(ErrorCode::invalid_argument, "holder fit pairs must be distinct");
  if (fit.r_max / fit.r_min < 10.0)
    fail(ErrorCode::invalid_argument,
         "insufficient decade span: max/min separation is below 10");

  const std::vector<double> ladder =
      depths.empty() ? default_depths(*dom) : depths;

  // x = -log|a-b| against y = eps * (a|b); two-parameter least squares in
  // closed form.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> xs, ys;
  xs.reserve(sep.size());
  ys.reserve(sep.size());
  for (std::size_t i = 0; i < boundary_pairs.size(); ++i) {
    const auto res = boundary_gromov_product(
        dist, dom, boundary_pairs[i].first, boundary_pairs[i].second, omega,
        ladder);
    const double x = -std::log(sep[i]);
    const double y = visual_eps * res.value;
    xs.push_back(x);
    ys.push_back(y);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = static_cast<double>(xs.size());
  const double det = m * sxx - sx * sx;
  if (!(std::abs(det) > 1e-12 * (1.0 + m * sxx)))
    fail(ErrorCode::invalid_argument,
         "holder fit separations are too degenerate for a slope");
  fit.slope = (m * sxy - sx * sy) / det;
  fit.intercept = (sy - fit.slope * sx) / m;
  double ss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.slope * xs[i] + fit.intercept);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / m);
  return fit;
}

std::vector<std::pair<C2, C2>> boundary_pairs_from_spec(
    const domain::DomainPtr& dom, const std::string& spec) {
  const std::string prefix = "geodesic-net:";
  std::vector<std::pair<C2, C2>> pairs;
  if (spec.rfind(prefix, 0) == 0) {
    std::size_t n = 0;
    try {
      n = std::stoul(spec.substr(prefix.size()));
    } catch (const std::exception&) {
      fail(ErrorCode::parse_error, "bad pair generator count in '" + spec + "'");
    }
    if (n < 2)
      fail(ErrorCode::invalid_argument, "pair generator needs at least 2 points");
    // Quasi-uniform anchors; each is paired with a partner slid along the
    // boundary at a scale cycling through a geometric ladder, so the
    // separations cover better than a decade regardless of n.
    const std::vector<C2> anchors = dom->boundary_sample(n);
    const double base = 0.5 * dom->bounding_radius();
    const double golden = 2.39996322972865332;  // rotates tangent directions
    for (std::size_t i = 0; i < n; ++i) {
      const C2 nu = dom->outward_normal(anchors[i]);
      const C2 jn = nu * cplx(0.0, 1.0);  // real-tangential rotation of the normal
      const C2 tau = detail::complex_tangent(nu);
      const double th = golden * static_cast<double>(i);
      C2 dir = jn * std::cos(th) + tau * std::sin(th);
      dir = dir * (1.0 / std::max(norm(dir), 1e-12));
      const double s = base * std::ldexp(1.0, -(1 + static_cast<int>(i % 6)));
      const C2 partner = detail::slide_on_boundary(*dom, anchors[i], nu, dir, s);
      if (finsler::dist(partner, anchors[i]) < 1e-9) continue;
      pairs.push_back({anchors[i], partner});
    }
    return pairs;
  }

  std::ifstream in(spec);
  if (!in) fail(ErrorCode::io_error, "cannot open pair list '" + spec + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    bool blank = true;
    for (char c : line)
      if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
    if (blank) continue;
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream ls(line);
    double v[8];
    for (int k = 0; k < 8; ++k)
      if (!(ls >> v[k]))
        fail(ErrorCode::parse_error,
             "pair list line " + std::to_string(lineno) +
                 ": expected eight comma-separated reals");
    const C2 a(v[0], v[1], v[2], v[3]), b(v[4], v[5], v[6], v[7]);
    for (const C2& p : {a, b})
      if (std::abs(dom->defining_value(p)) > 1e-6)
        fail(ErrorCode::invalid_argument,
             "pair list line " + std::to_string(lineno) +
                 ": point is not on the boundary");
    pairs.push_back({a, b});
  }
  return pairs;
}

}  // namespace finsler::hyperbolicity
