#pragma once

#include <cstddef>
#include <vector>

#include "finslerlab/domain.hpp"
#include "finslerlab/metrics.hpp"

// Length functional, geodesic search by waypoint optimization, an independent
// lattice shortest-path oracle, and the exact normal-fiber distances. All
// distance computations return a DistanceResult carrying the realizing path,
// the method that produced it, and a conservative error estimate; consumers
// fold the estimate into their own tolerances instead of trusting the raw
// value.

namespace finsler::geodesics {

enum class Method { optimizer, grid_oracle, fiber_exact, chord_upper };

const char* method_name(Method m);

// Piecewise linear curve, strictly interior. euclid_length and H (the maximum
// boundary distance seen along the curve) are filled by validate_path /
// path_length together with the length itself.
struct Path {
  std::vector<C2> waypoints;
  double finsler_length = 0.0;
  double euclid_length = 0.0;
  double H = 0.0;
};

struct DistanceResult {
  double value = 0.0;
  Path path;
  Method method = Method::optimizer;
  double error_estimate = 0.0;
};

struct GeodesicOptions {
  int waypoints = 16;      // initial segment count, doubled until converged
  int restarts = 3;        // chord plus inward-arc initializations
  int max_iters = 60;      // pattern-descent sweeps per refinement level
  double tol = 1e-4;       // relative length change that stops the doubling
  double quad_tol = 1e-6;  // Richardson target for reported lengths
  int descent_quad = 4;    // midpoint samples per segment inside the descent
  int max_waypoints = 128;
  bool run_oracle = false;  // cross-check against the grid oracle at the end

  // Cheap settings for bulk distance tables (hyperbolicity sampling): one
  // chord start, coarse descent quadrature, loose stopping. Error estimates
  // grow accordingly; nothing else changes.
  static GeodesicOptions fast_profile();
};

// Checks that every waypoint and 8 sub-samples per segment lie strictly
// inside, and fills euclid_length and H. Throws path_exits_domain naming the
// offending segment.
void validate_path(const domain::Domain& dom, Path& path);

// Composite midpoint rule per segment, Richardson-refined until the relative
// change drops below quad_tol. Validates first, sets finsler_length, and
// returns it. quad_tail, when given, receives the summed last refinement
// deltas (a quadrature error proxy).
double path_length(const metrics::FinslerMetric& metric, Path& path, double quad_tol = 1e-6,
                   double* quad_tail = nullptr);

// Derivative-free geodesic search: multi-restart pattern descent over interior
// waypoints with an annealed log-barrier on the defining function, segment
// count doubling until the reported length stabilizes. Pairs with an endpoint
// closer to the boundary than 1e-4 are routed through normal-fiber legs down
// to half the collar depth before the free optimization connects them.
DistanceResult geodesic(const metrics::MetricPtr& metric, const C2& x, const C2& y,
                        const GeodesicOptions& opts = {});

// Independent upper-bound oracle: Dijkstra over a lattice in the complex-line
// section spanned by x and y, nodes kept when their boundary distance exceeds
// h/2, edge weights from the metric at segment midpoints. h is adjusted so
// both endpoints are exact nodes. h <= 0 picks a resolution automatically.
DistanceResult grid_oracle_distance(const metrics::MetricPtr& metric, const C2& x, const C2& y,
                                    double h, std::size_t node_budget = 2000000);

// Exact distance |log(delta(y)/delta(x))| for points on a common boundary
// fiber (projection feet within 1e-6), with the straight segment as path.
DistanceResult fiber_distance(const domain::DomainPtr& dom, const C2& x, const C2& y);

// Length of the straight segment x -> y when it stays interior.
DistanceResult chord_upper(const metrics::MetricPtr& metric, const C2& x, const C2& y,
                           double quad_tol = 1e-6);

}  // namespace finsler::geodesics
