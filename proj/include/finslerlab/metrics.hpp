#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "finslerlab/chart.hpp"
#include "finslerlab/domain.hpp"

// Finsler metrics on pseudoconvex domains: the chart-local Catlin metric and
// its modified (boundary-distance) form, a global collar metric glued from a
// finite chart cover, the convex-domain Kobayashi band, scaled Euclidean
// metrics, and the distance gauges g_k.

namespace finsler::metrics {

// Boundary chart plus the compiled coefficient engine evaluating the frame
// coefficients C_l(z) = max_{j+k=l} |L_{j,k}(z)|.
struct CatlinChart {
  chart::ChartFrame frame;
  domain::DomainPtr dom;

  const C2& center() const { return frame.center; }
  double radius() const { return frame.radius; }
  int levels() const { return frame.m_type; }
};

// Compiles a chart at a boundary point. m = 0 uses the local D'Angelo type of
// the center; the global cover passes the domain-wide type bound instead so
// charts near special points keep every scale in the max (a chart compiled
// only to the local type of a generic center would degenerate on the
// higher-type loci it overlaps).
CatlinChart build_catlin_chart(const domain::DomainPtr& dom, const C2& boundary_point, int m = 0,
                               double initial_radius = 0.8);

// M(z, X) = |b2|/|r(z)| + |b1| sum_{l=2}^{m} (C_l(z)/|r(z)|)^{1/l} where
// X = b1 L1 + b2 L2 in the chart frame. X is given in chart coordinates.
double catlin_eval(const CatlinChart& chart, const C2& z, const C2& X);

// Modified form on the projection collar: |X_N|/delta + |X_H| sum_l
// (C_l(z)/delta)^{1/l} with X split at the boundary foot. X is ambient.
double catlin_tilde_eval(const CatlinChart& chart, const C2& z, const C2& X);

enum class BandSide { lower, upper };

class FinslerMetric {
 public:
  virtual ~FinslerMetric() = default;
  // Positively homogeneous in X; positive for X != 0 at interior z.
  virtual double eval(const C2& z, const C2& X) const = 0;
  const domain::DomainPtr& dom() const { return dom_; }
  const std::string& selector() const { return selector_; }

 protected:
  FinslerMetric(domain::DomainPtr dom, std::string selector)
      : dom_(std::move(dom)), selector_(std::move(selector)) {}
  domain::DomainPtr dom_;
  std::string selector_;
};

using MetricPtr = std::shared_ptr<const FinslerMetric>;

struct CoverOptions {
  std::size_t initial_centers = 48;
  std::size_t cloud_points = 10000;
  std::size_t max_charts = 600;
  double initial_radius = 0.8;
};

// Finite chart cover of the collar: quasi-uniform boundary centers, radii from
// the chart validity rule, densified until every point of a collar test cloud
// lies in a closed chart ball. eps is the validated collar depth the glued
// metric switches at.
struct CatlinCover {
  std::vector<CatlinChart> charts;
  double eps = 0.0;
};

CatlinCover build_catlin_cover(const domain::DomainPtr& dom, const CoverOptions& opts = {});

class CatlinGlobalMetric : public FinslerMetric {
 public:
  CatlinGlobalMetric(domain::DomainPtr dom, CatlinCover cover);

  // delta(z) < eps: max of catlin_tilde over the charts whose closed ball
  // contains z. delta(z) > eps: |X|/eps. At the junction the pointwise max of
  // both branches keeps the metric upper semicontinuous.
  double eval(const C2& z, const C2& X) const override;

  double eps() const { return cover_.eps; }
  const std::vector<CatlinChart>& charts() const { return cover_.charts; }

 private:
  CatlinCover cover_;
  std::vector<double> radius2_;  // squared radii, scan-friendly
};

class ConvexBandMetric : public FinslerMetric {
 public:
  ConvexBandMetric(domain::DomainPtr dom, BandSide side);
  double eval(const C2& z, const C2& X) const override;
  BandSide side() const { return side_; }

 private:
  BandSide side_;
};

class EuclideanScaledMetric : public FinslerMetric {
 public:
  EuclideanScaledMetric(domain::DomainPtr dom, double scale);
  double eval(const C2& z, const C2& X) const override;
  double scale() const { return scale_; }

 private:
  double scale_;
};

MetricPtr make_catlin_global(const domain::DomainPtr& dom, const CoverOptions& opts = {});
MetricPtr make_convex_band(const domain::DomainPtr& dom, BandSide side);
MetricPtr make_euclidean_scaled(const domain::DomainPtr& dom, double scale);

// Selector strings: "catlin", "convex-upper", "convex-lower", "euclidean:<c>".
MetricPtr parse_metric(const domain::DomainPtr& dom, const std::string& selector);

// g_k(x, y) = 2 log((|x-y|^k + max(delta(x), delta(y))) / sqrt(delta(x) delta(y)))
double gauge_g(int k, const domain::Domain& dom, const C2& x, const C2& y);

// Parameters of the slow/lower metric bounds: d >= alpha |log(dx/dy)| - C1 and
// F(z, X) >= C2 |X| / delta^beta.
struct FinslerBoundParams {
  double alpha = 1.0;
  double beta = 0.5;
  double C1 = 0.0;
  double C2 = 0.0;
};

// Two-sided pinch of a collar metric between |X_N|/delta + |X_H|/(C delta^{1/m})
// and |X_N|/delta + C |X_H|/delta^{1/2}. Fits the smallest C on the first half
// of the samples and validates the second half.
struct NkBoundsReport {
  double fitted_C = 1.0;
  std::size_t calibration_count = 0;
  std::size_t holdout_count = 0;
  std::size_t holdout_violations = 0;
  double worst_margin = 0.0;  // largest holdout violation, 0 when clean
};

NkBoundsReport check_nk_bounds(const FinslerMetric& metric,
                               const std::vector<std::pair<C2, C2>>& samples);

}  // namespace finsler::metrics
