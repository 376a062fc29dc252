#include "finslerlab/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "finslerlab/errors.hpp"

namespace finsler::metrics {

namespace {

// Matches the chart validity rule (|dr/dz2| bounded below on the chart ball).
constexpr double kFrameFloor = 0.1;

// Normal/tangential split of X at the nearest boundary point. The tangential
// part is the residual vector, not a Pythagorean complement, so a purely
// normal X yields an exact zero up to one rounding step.
struct SplitParts {
  double delta = 0.0;
  double xn = 0.0;
  double xh = 0.0;
};

SplitParts split_at_foot(const domain::Domain& dom, const C2& z, const C2& X) {
  domain::CollarProbe p = dom.collar_probe(z);
  cplx comp = hdot(X, p.normal);
  C2 xnv = p.normal * comp;
  return {p.delta, norm(xnv), norm(X - xnv)};
}

double tilde_from_parts(const CatlinChart& ch, const C2& z, double delta, double xn, double xh) {
  C2 w = ch.frame.to_chart(z);
  auto pv = ch.frame.engine->eval(w);
  if (pv.frame_ratio < kFrameFloor) fail(ErrorCode::chart_invalid, "chart invalid at point");
  double sum = 0.0;
  for (int l = 2; l <= ch.frame.m_type; ++l) sum += std::pow(pv.c[std::size_t(l)] / delta, 1.0 / l);
  return xn / delta + xh * sum;
}

}  // namespace

CatlinChart build_catlin_chart(const domain::DomainPtr& dom, const C2& boundary_point, int m,
                               double initial_radius) {
  if (!dom) fail(ErrorCode::invalid_argument, "chart needs a domain");
  int levels = m > 0 ? m : dom->dangelo_type(boundary_point);
  if (levels < 2) fail(ErrorCode::invalid_argument, "chart needs at least two coefficient levels");
  C2 n = dom->outward_normal(boundary_point);
  CatlinChart out{chart::build_chart_frame(dom->defining_poly(), boundary_point, n, levels,
                                           initial_radius),
                  dom};
  return out;
}

double catlin_eval(const CatlinChart& ch, const C2& z, const C2& X) {
  if (!ch.frame.contains(z)) fail(ErrorCode::invalid_argument, "point is outside the chart ball");
  if (!ch.dom->inside(z)) fail(ErrorCode::invalid_argument, "point is outside the domain");
  C2 w = ch.frame.to_chart(z);
  auto pv = ch.frame.engine->eval(w);
  if (pv.frame_ratio < kFrameFloor) fail(ErrorCode::chart_invalid, "chart invalid at point");
  double r = std::abs(ch.frame.engine->eval_r(w).real());
  if (r < 1e-300) fail(ErrorCode::invalid_argument, "Catlin metric undefined on the boundary");
  cplx s = pv.r_z1 / pv.r_z2;
  double b1 = std::abs(X.z1);
  double b2 = std::abs(X.z2 + s * X.z1);
  double sum = 0.0;
  for (int l = 2; l <= ch.frame.m_type; ++l) sum += std::pow(pv.c[std::size_t(l)] / r, 1.0 / l);
  return b2 / r + b1 * sum;
}

double catlin_tilde_eval(const CatlinChart& ch, const C2& z, const C2& X) {
  if (!ch.frame.contains(z)) fail(ErrorCode::invalid_argument, "point is outside the chart ball");
  domain::Projection proj = ch.dom->boundary_project(z);  // enforces the collar
  cplx comp = hdot(X, proj.normal);
  C2 xnv = proj.normal * comp;
  return tilde_from_parts(ch, z, proj.distance, norm(xnv), norm(X - xnv));
}

CatlinCover build_catlin_cover(const domain::DomainPtr& dom, const CoverOptions& opts) {
  if (!dom) fail(ErrorCode::invalid_argument, "cover needs a domain");
  CatlinCover cover;
  cover.eps = dom->collar();
  int m = dom->m_bound();

  for (const C2& c : dom->boundary_sample(opts.initial_centers))
    cover.charts.push_back(build_catlin_chart(dom, c, m, opts.initial_radius));

  // collar test cloud: quasi-uniform boundary feet at log-spaced depths
  std::vector<C2> feet = dom->boundary_sample(opts.cloud_points);
  std::vector<C2> cloud;
  cloud.reserve(feet.size());
  double u = 0.5;
  for (const C2& f : feet) {
    u += 0.6180339887498949;
    u -= std::floor(u);
    cloud.push_back(dom->fiber_point(f, cover.eps * std::pow(1e-3, u)));
  }

  auto covered = [&](const C2& z) {
    for (const CatlinChart& ch : cover.charts)
      if (ch.frame.contains(z)) return true;
    return false;
  };
  for (int pass = 0; pass < 8; ++pass) {
    bool added = false;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (covered(cloud[i])) continue;
      if (cover.charts.size() >= opts.max_charts)
        fail(ErrorCode::cover_gap, "chart budget exhausted before the collar cloud was covered");
      cover.charts.push_back(build_catlin_chart(dom, feet[i], m, opts.initial_radius));
      if (!cover.charts.back().frame.contains(cloud[i]))
        fail(ErrorCode::cover_gap, "chart at an uncovered point is narrower than the collar depth");
      added = true;
    }
    if (!added) return cover;
  }
  fail(ErrorCode::cover_gap, "collar cloud still uncovered after densification");
}

CatlinGlobalMetric::CatlinGlobalMetric(domain::DomainPtr dom, CatlinCover cover)
    : FinslerMetric(std::move(dom), "catlin"), cover_(std::move(cover)) {
  if (cover_.charts.empty()) fail(ErrorCode::cover_gap, "global metric needs at least one chart");
  if (!(cover_.eps > 0.0)) fail(ErrorCode::invalid_argument, "collar depth must be positive");
  radius2_.reserve(cover_.charts.size());
  for (const CatlinChart& ch : cover_.charts) radius2_.push_back(ch.radius() * ch.radius());
}

double CatlinGlobalMetric::eval(const C2& z, const C2& X) const {
  if (!dom_->inside(z)) fail(ErrorCode::invalid_argument, "metric needs an interior point");
  double nx2 = norm2(X);
  if (nx2 == 0.0) return 0.0;
  domain::CollarProbe pr = dom_->collar_probe(z);
  double delta = pr.delta;

  double best = -1.0;
  if (delta >= cover_.eps) best = std::sqrt(nx2) / cover_.eps;
  if (delta <= cover_.eps) {
    cplx comp = hdot(X, pr.normal);
    C2 xnv = pr.normal * comp;
    double xn = norm(xnv), xh = norm(X - xnv);
    bool found = false, valid = false;
    double vmax = -1.0;
    for (std::size_t i = 0; i < cover_.charts.size(); ++i) {
      const CatlinChart& ch = cover_.charts[i];
      C2 d(z.z1 - ch.frame.center.z1, z.z2 - ch.frame.center.z2);
      if (norm2(d) > radius2_[i]) continue;
      found = true;
      try {
        vmax = std::max(vmax, tilde_from_parts(ch, z, delta, xn, xh));
        valid = true;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::chart_invalid && e.code() != ErrorCode::pole_proximity) throw;
      }
    }
    if (!found) {
      if (best < 0.0) fail(ErrorCode::cover_gap, "no chart ball covers this collar point");
    } else if (!valid) {
      if (best < 0.0)
        fail(ErrorCode::chart_invalid, "every chart covering this point is frame-degenerate");
    } else {
      best = std::max(best, vmax);
    }
  }
  return best;
}

ConvexBandMetric::ConvexBandMetric(domain::DomainPtr dom, BandSide side)
    : FinslerMetric(std::move(dom), side == BandSide::lower ? "convex-lower" : "convex-upper"),
      side_(side) {
  if (!dom_->convex())
    fail(ErrorCode::invalid_argument, "the Kobayashi band needs a convex domain");
}

double ConvexBandMetric::eval(const C2& z, const C2& X) const {
  double nx = norm(X);
  if (nx == 0.0) return 0.0;
  double upper = nx / dom_->directional_distance(z, X);
  return side_ == BandSide::lower ? 0.5 * upper : upper;
}

EuclideanScaledMetric::EuclideanScaledMetric(domain::DomainPtr dom, double scale)
    : FinslerMetric(std::move(dom), "euclidean:" + format_double(scale)), scale_(scale) {
  if (!(scale > 0.0)) fail(ErrorCode::invalid_argument, "euclidean scale must be positive");
}

double EuclideanScaledMetric::eval(const C2& z, const C2& X) const {
  (void)z;
  return scale_ * norm(X);
}

MetricPtr make_catlin_global(const domain::DomainPtr& dom, const CoverOptions& opts) {
  return std::make_shared<CatlinGlobalMetric>(dom, build_catlin_cover(dom, opts));
}

MetricPtr make_convex_band(const domain::DomainPtr& dom, BandSide side) {
  return std::make_shared<ConvexBandMetric>(dom, side);
}

MetricPtr make_euclidean_scaled(const domain::DomainPtr& dom, double scale) {
  return std::make_shared<EuclideanScaledMetric>(dom, scale);
}

MetricPtr parse_metric(const domain::DomainPtr& dom, const std::string& selector) {
  if (selector == "catlin") return make_catlin_global(dom);
  if (selector == "convex-upper") return make_convex_band(dom, BandSide::upper);
  if (selector == "convex-lower") return make_convex_band(dom, BandSide::lower);
  const std::string prefix = "euclidean:";
  if (selector.rfind(prefix, 0) == 0) {
    double c = 0.0;
    try {
      std::size_t used = 0;
      c = std::stod(selector.substr(prefix.size()), &used);
      if (used != selector.size() - prefix.size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      fail(ErrorCode::parse_error, "bad euclidean scale in metric selector: " + selector);
    }
    return make_euclidean_scaled(dom, c);
  }
  fail(ErrorCode::parse_error, "unknown metric selector: " + selector);
}

double gauge_g(int k, const domain::Domain& dom, const C2& x, const C2& y) {
  if (k < 1) fail(ErrorCode::invalid_argument, "gauge order must be at least 1");
  if (!dom.inside(x) || !dom.inside(y)) fail(ErrorCode::invalid_argument, "gauge needs interior points");
  double e = dist(x, y);
  if (e == 0.0) return 0.0;
  double dx = dom.collar_probe(x).delta;
  double dy = dom.collar_probe(y).delta;
  return 2.0 * std::log((std::pow(e, double(k)) + std::max(dx, dy)) / std::sqrt(dx * dy));
}

NkBoundsReport check_nk_bounds(const FinslerMetric& metric,
                               const std::vector<std::pair<C2, C2>>& samples) {
  if (samples.size() < 4) fail(ErrorCode::invalid_argument, "need at least 4 collar samples");
  const domain::Domain& dom = *metric.dom();
  double m = double(dom.m_bound());

  NkBoundsReport rep;
  std::size_t half = samples.size() / 2;
  rep.calibration_count = half;
  rep.holdout_count = samples.size() - half;

  // both bounds hold with C = 1 when X is purely normal
  double C = 1.0;
  for (std::size_t i = 0; i < half; ++i) {
    const auto& [z, X] = samples[i];
    SplitParts sp = split_at_foot(dom, z, X);
    if (sp.xh < 1e-13 * norm(X)) continue;
    double K = metric.eval(z, X);
    double gap = K - sp.xn / sp.delta;
    C = std::max(C, (sp.xh * std::pow(sp.delta, -1.0 / m)) / std::max(gap, 1e-300));
    C = std::max(C, std::max(gap, 0.0) / (sp.xh * std::pow(sp.delta, -0.5)));
  }
  rep.fitted_C = C;

  for (std::size_t i = half; i < samples.size(); ++i) {
    const auto& [z, X] = samples[i];
    SplitParts sp = split_at_foot(dom, z, X);
    double K = metric.eval(z, X);
    double base = sp.xn / sp.delta;
    double viol_low = (base + sp.xh * std::pow(sp.delta, -1.0 / m) / C) - K;
    double viol_up = K - (base + C * sp.xh * std::pow(sp.delta, -0.5));
    double v = std::max(viol_low, viol_up);
    if (v > 1e-6 * (1.0 + K)) {
      ++rep.holdout_violations;
      rep.worst_margin = std::max(rep.worst_margin, v);
    }
  }
  return rep;
}

}  // namespace finsler::metrics
