#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "finslerlab/domain.hpp"
#include "finslerlab/geodesics.hpp"
#include "finslerlab/geometry.hpp"
#include "finslerlab/metrics.hpp"

namespace finsler::hyperbolicity {

// Distance provider. The geodesic optimizer is the default, but synthetic
// tables (closed-form gauges, toy metrics) plug in through the same slot so
// the Gromov analysis can be exercised against known-hyperbolic inputs.
using DistanceFn =
    std::function<geodesics::DistanceResult(const C2& x, const C2& y)>;

// Wraps the optimizer with fixed options into a DistanceFn.
DistanceFn optimizer_distance(const metrics::MetricPtr& metric,
                              const geodesics::GeodesicOptions& opts =
                                  geodesics::GeodesicOptions::fast_profile());

// Exact distance table d(x,y) = g1(x,y) on a fixed domain; used as a control
// input whose Gromov products provably have visual slope one.
DistanceFn gauge_distance(const domain::DomainPtr& dom, int k = 1);

// A basepoint, a point cloud, and the cached distance table against which all
// Gromov products are formed. The pair table stores each unordered pair once,
// so symmetry is exact by construction and the diagonal is identically zero.
struct GromovSample {
  C2 basepoint;
  std::vector<C2> points;

  std::vector<double> base_dist;  // d(points[i], basepoint)
  std::vector<double> base_err;
  std::vector<double> pair_dist;  // upper triangle, row-major over i < j
  std::vector<double> pair_err;

  std::size_t size() const { return points.size(); }

  // Flattened index of the unordered pair {i, j}, i != j.
  std::size_t pair_index(std::size_t i, std::size_t j) const;

  double dist(std::size_t i, std::size_t j) const;  // symmetric, dist(i,i)=0
  double err(std::size_t i, std::size_t j) const;

  // Largest single-entry error in the table; the slack used when the
  // invariants are checked against cached distances.
  double max_err() const;
};

// Index value standing for the basepoint itself in gromov_product.
inline constexpr std::size_t kBasepoint = static_cast<std::size_t>(-1);

// Fills the distance table for the given cloud. Pair fill runs in parallel
// (each worker writes disjoint slots; results do not depend on the thread
// count). `threads` of zero picks the hardware concurrency.
GromovSample build_gromov_sample(const DistanceFn& dist, const C2& basepoint,
                                 const std::vector<C2>& points,
                                 unsigned threads = 0);

// Builds a sample from explicit tables instead of a distance callback.
// `pair_dist[i][j]` must be a full symmetric matrix with zero diagonal.
GromovSample sample_from_table(std::vector<double> base_dist,
                               const std::vector<std::vector<double>>& pair_dist);

// Keeps the first n points of s, slicing the cached tables. Used to measure
// how the hyperbolicity estimate moves as the sample grows.
GromovSample prefix_sample(const GromovSample& s, std::size_t n);

// (x|y) relative to the sample basepoint: (d(x,w) + d(y,w) - d(x,y)) / 2,
// clamped at zero. Accepts kBasepoint for either slot.
double gromov_product(const GromovSample& s, std::size_t i, std::size_t j);

// Worst four-point defect: max over ordered triples (x, y, z) of
// min{(x|z), (z|y)} - (x|y), floored at zero. Full enumeration up to
// `full_enum_limit` points; beyond that a fixed-seed uniform subsample of
// `subsample_triples` triples.
struct DeltaOptions {
  std::size_t full_enum_limit = 200;
  std::size_t subsample_triples = 1000000;
  std::uint64_t seed = 0;
};
double delta_estimate(const GromovSample& s, const DeltaOptions& opts = {});

// Visual metric value exp(-eps * product) and the multiplicative quasi
// triangle constant it satisfies on the sample. The constant is reported,
// never asserted: it equals exp(eps * delta) because
//   rho(x,y) <= C max{rho(x,z), rho(z,y)}  <=>  (x|y) >= min{...} - log(C)/eps.
double visual_metric(double product, double eps);
double visual_quasi_constant(const GromovSample& s, double eps,
                             const DeltaOptions& opts = {});

// Boundary Gromov product by diagonal approach: both arguments slide down
// their fibers to equal depth t and (x_t|y_t) is evaluated per depth. The
// limit estimate is the deepest value; the error is the spread of the final
// three. A growing final spread above `fail_spread` aborts with
// extrapolation_failed.
struct BoundaryProductResult {
  double value = 0.0;
  double error = 0.0;               // spread of the last three values
  std::vector<double> sequence;     // one product per depth, shallow to deep
  std::vector<double> depths;
};

// Geometric default ladder 2^-k, k = 4..10, clamped into the collar.
std::vector<double> default_depths(const domain::Domain& dom);

BoundaryProductResult boundary_gromov_product(
    const DistanceFn& dist, const domain::DomainPtr& dom, const C2& a,
    const C2& b, const C2& omega, const std::vector<double>& depths,
    double fail_spread = 0.25);

// Least-squares line of eps*(a|b) against -log|a-b| over the pair set.
// For eps = 1 the slope lands in [1, m] when the boundary is m-convex-like;
// other eps rescale the slope proportionally.
struct HolderFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;      // RMS residual of the fit
  std::size_t pair_count = 0; // at least 20
  double r_min = 0.0;         // smallest |a-b| among the pairs
  double r_max = 0.0;         // largest; r_max / r_min >= 10
};

HolderFit holder_fit(const DistanceFn& dist, const domain::DomainPtr& dom,
                     const std::vector<std::pair<C2, C2>>& boundary_pairs,
                     const C2& omega, double visual_eps = 1.0,
                     const std::vector<double>& depths = {});

// Boundary pair sets come either from a generator string "geodesic-net:<n>"
// (n quasi-uniform boundary points paired at stride 1, 2, 4, ... so the
// separations span several scales) or from a file with one pair per line as
// eight comma-separated reals; '#' starts a comment.
std::vector<std::pair<C2, C2>> boundary_pairs_from_spec(
    const domain::DomainPtr& dom, const std::string& spec);

}  // namespace finsler::hyperbolicity
