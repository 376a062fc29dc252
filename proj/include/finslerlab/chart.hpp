#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "finslerlab/geometry.hpp"
#include "finslerlab/symbolic.hpp"

// Boundary chart machinery: a constant unitary rotation takes the outward
// normal at the chart center into the complex e2 line, after which dr/dz2 is
// bounded below on a ball and the tangential frame field (1, -s) is defined.
// Iterated coefficients are evaluated through a compiled expression tape
// (shared-subexpression DAG over small derivative polynomials); the expanded
// exact rational expressions are materialized lazily for inspection/tests.

namespace finsler::chart {

// Unitary 2x2 (row-major, w = U z) with U * normal = (0, i), U * tangent = (1, 0).
std::array<cplx, 4> rotation_to_normal(const C2& unit_normal);
std::array<cplx, 4> adjoint(const std::array<cplx, 4>& u);
C2 apply(const std::array<cplx, 4>& u, const C2& z);

class CoeffEngine {
 public:
  // r: defining polynomial in the rotated coordinates. m: highest coefficient
  // level (j + k) to compile, m >= 2.
  CoeffEngine(sym::Poly r, int m, sym::IteratedOrder order = sym::IteratedOrder::l1_outermost);
  ~CoeffEngine();
  CoeffEngine(CoeffEngine&&) noexcept;

  int max_level() const { return m_; }

  struct PointValues {
    // c[l] = max |L_{j,k}|, j + k = l; entries below index 2 unused.
    std::array<double, 16> c;
    cplx r_z1, r_z2;
    double frame_ratio;  // |dr/dz2| / |grad r|, in [0, 1/2]
  };
  // w is in rotated coordinates. Throws pole_proximity when dr/dz2 ~ 0.
  PointValues eval(const C2& w) const;

  cplx eval_r(const C2& w) const;

  // Exact expanded expressions for level l (2 <= l <= m), one per (j, k) pair
  // in the order given by jk_pairs. Built on first use.
  const std::vector<sym::RationalExpr>& expanded_level(int l) const;
  static std::vector<std::pair<int, int>> jk_pairs(int l);

  const sym::Poly& poly() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int m_;
};

struct ChartFrame {
  C2 center;                  // boundary point, original coordinates
  std::array<cplx, 4> rot;    // w = rot * z
  std::array<cplx, 4> rot_adj;
  double radius = 0.0;        // validity ball radius around center (unitary-invariant)
  int m_type = 2;             // coefficient levels carried by the engine
  std::shared_ptr<CoeffEngine> engine;

  C2 to_chart(const C2& z) const { return apply(rot, z); }
  bool contains(const C2& z) const { return dist(z, center) <= radius; }
};

// Builds the rotated frame at a boundary point and shrinks the radius (from
// initial_radius, halving) until |dr/dz2| >= 0.1 |grad r| holds at 200
// quasi-uniform samples of the chart ball. Throws chart_invalid when the
// radius would drop below 1e-3.
ChartFrame build_chart_frame(const sym::Poly& r, const C2& boundary_point, const C2& unit_normal,
                             int m, double initial_radius = 0.8,
                             sym::IteratedOrder order = sym::IteratedOrder::l1_outermost);

}  // namespace finsler::chart
