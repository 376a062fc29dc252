#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "finslerlab/geometry.hpp"
#include "finslerlab/rng.hpp"
#include "finslerlab/symbolic.hpp"

namespace finsler::domain {

enum class BaseKind { ball, egg, rigid, generic };

// Affine cut nu . x < offset (real coordinates); used by cap domains.
struct Cut {
  C2 normal;  // real 4-vector stored in complex layout, unit length
  double offset = 0.0;
};

struct Projection {
  C2 foot;
  double distance = 0.0;
  C2 normal;  // unit outward normal at foot (complex line representative)
  bool on_cut = false;
  bool unique = true;
};

// Boundary distance plus the unit outward normal at the nearest boundary
// point, without uniqueness diagnostics. Metric evaluation calls this in hot
// loops, so model domains get closed forms or reduced solves.
struct CollarProbe {
  double delta = 0.0;
  C2 normal;
};

class Domain {
 public:
  static std::shared_ptr<const Domain> ball();
  static std::shared_ptr<const Domain> egg(int k);
  // Graph domain Im z2 < F(z1, conj z1, Re z2) intersected with |z| < radius.
  // `terms` rows are (a, b, c, coeff) exponents on z1, conj z1, Re z2.
  static std::shared_ptr<const Domain> rigid(const std::vector<std::array<double, 5>>& terms,
                                             double radius, int m_bound);
  static std::shared_ptr<const Domain> cap_of(std::shared_ptr<const Domain> base, const C2& cut_normal,
                                              double cut_offset);
  // Bounded domain from a raw conjugate-symmetric polynomial (testing and
  // rotated-model construction). Witness must satisfy r < 0.
  static std::shared_ptr<const Domain> from_poly(sym::Poly r, int m_bound, const C2& witness,
                                                 double bounding_radius, bool convex,
                                                 std::string name);

  static std::shared_ptr<const Domain> from_json_text(const std::string& text);
  static std::shared_ptr<const Domain> from_file(const std::string& path);

  const std::string& name() const { return name_; }
  BaseKind base_kind() const { return base_; }
  bool capped() const { return !cuts_.empty(); }
  const std::vector<Cut>& cuts() const { return cuts_; }
  const sym::Poly& defining_poly() const { return r_; }
  int m_bound() const { return m_bound_; }
  bool convex() const { return convex_; }
  // Validated collar width: inward depth on which boundary projection is
  // unique; fiber constructions and the collar metric live inside it.
  // Estimated on first use (the sweep is costly on generic domains).
  double collar() const {
    ensure_collar();
    return collar_eps_;
  }
  C2 witness() const { return witness_; }
  double bounding_radius() const { return bounding_radius_; }
  int egg_exponent() const { return egg_k_; }

  // Max over the smooth defining value and the affine/bounding constraints;
  // negative exactly on the domain.
  double defining_value(const C2& z) const;
  bool inside(const C2& z) const { return defining_value(z) < 0.0; }

  double boundary_distance(const C2& z) const;
  // Collar-checked projection; throws outside_collar beyond the validated depth.
  Projection boundary_project(const C2& z) const;
  // No collar check; reports non-uniqueness in the flag instead of failing.
  Projection project_soft(const C2& z) const;
  // Fast distance/normal probe (see CollarProbe). Agrees with project_soft
  // wherever the projection is unique; interior z only.
  CollarProbe collar_probe(const C2& z) const;

  // Distance to the boundary inside the complex line z + C v; polar-grid
  // bracketing with per-ray bisection to 1e-10.
  double directional_distance(const C2& z, const C2& v) const;

  C2 outward_normal(const C2& boundary_point) const;
  // Splits X into the complex-normal and complex-tangential parts at the
  // projection of z.
  std::pair<C2, C2> normal_decompose(const C2& z, const C2& X) const;

  int dangelo_type(const C2& boundary_point, int m_max = 12) const;

  C2 fiber_point(const C2& boundary_point, double depth) const;

  // Boundary point hit by the ray from the witness through direction d.
  C2 shoot_boundary(const C2& direction) const;
  // Deterministic quasi-uniform boundary sample (radial low-discrepancy shots).
  std::vector<C2> boundary_sample(std::size_t n) const;
  C2 random_boundary_point(Rng& rng) const;
  C2 random_collar_point(Rng& rng, double depth_min, double depth_max) const;
  // True when p sits on the smooth defining surface with the given clearance
  // from every cut and side constraint. Sampling confines itself to this face.
  bool on_distinguished_face(const C2& p, double margin) const;

  void set_name(std::string n);
  // Tighten the validated collar (never widens it); file override hook.
  void shrink_collar(double eps);

 private:
  Domain() = default;
  void finalize();             // gradient tables, witness check, seed cloud
  void ensure_collar() const;  // one-time uniqueness sweep

  struct Calc;  // symbolic derivative tables for gradient / Hessian evaluation
  std::shared_ptr<const Calc> calc_;

  std::string name_;
  BaseKind base_ = BaseKind::generic;
  int egg_k_ = 1;
  sym::Poly r_;
  std::vector<Cut> cuts_;
  double bounding_radius_ = 0.0;  // >0: |z| < R is part of the domain definition
  bool convex_ = false;
  int m_bound_ = 2;
  mutable double collar_eps_ = -1.0;  // negative until estimated
  std::optional<double> collar_override_;
  C2 witness_;
  std::vector<C2> seeds_;  // projection seeds for the generic Newton path

  double smooth_distance(const C2& z, Projection* proj, bool* unique) const;
  double cut_distance(const C2& z, std::size_t idx, Projection* proj) const;
  double ray_exit(const C2& z, const C2& unit_dir, double tmax) const;
};

using DomainPtr = std::shared_ptr<const Domain>;

}  // namespace finsler::domain
