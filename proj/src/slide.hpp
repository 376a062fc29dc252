#pragma once

#include <algorithm>
#include <cmath>

#include "finslerlab/domain.hpp"
#include "finslerlab/errors.hpp"
#include "finslerlab/geometry.hpp"

namespace finsler::detail {

// Unit complex-tangential representative at a boundary point: Hermitian
// orthogonal to the outward normal.
inline C2 complex_tangent(const C2& normal) {
  return C2(-std::conj(normal.z2), std::conj(normal.z1));
}

// Slide a boundary point a distance roughly `s` along the boundary. The
// tangent step usually exits a convex domain, so instead of projecting we
// bisect the defining function along the chord from a slightly inward copy
// of p to the stepped point.
inline C2 slide_on_boundary(const domain::Domain& dom, const C2& p,
                            const C2& nu, const C2& dir, double s) {
  const C2 target = p + dir * s;
  const double rt = dom.defining_value(target);
  if (rt == 0.0) return target;
  if (rt < 0.0) return dom.boundary_project(target).foot;

  double h = std::min(0.25 * s, 0.5 * dom.collar());
  C2 inner = p - nu * h;
  while (!(dom.defining_value(inner) < 0.0) && h > 1e-14) {
    h *= 0.5;
    inner = p - nu * h;
  }
  if (!(dom.defining_value(inner) < 0.0))
    fail(ErrorCode::projection_failed,
         "cannot start a boundary slide at this point");
  double lo = 0.0, hi = 1.0;  // r(inner) < 0 < r(target)
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    const C2 q = inner + (target - inner) * mid;
    (dom.defining_value(q) < 0.0 ? lo : hi) = mid;
  }
  return inner + (target - inner) * (0.5 * (lo + hi));
}

}  // namespace finsler::detail
