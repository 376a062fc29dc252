#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "finslerlab/domain.hpp"
#include "finslerlab/geodesics.hpp"
#include "finslerlab/geometry.hpp"
#include "finslerlab/metrics.hpp"

// Calibrate-and-validate verification of the quantitative distance bounds:
// each check fits its unnamed constant on a calibration sample (max violation,
// one-sided), then demands zero holdout violations beyond a tolerance plus the
// folded geodesic errors. Fitted constants never see holdout data.

namespace finsler::harness {

enum class CheckStatus { passed, failed, skipped };
const char* status_name(CheckStatus s);

struct FittedConstant {
  std::string name;
  double value = 0.0;
};

struct VerificationReport {
  std::string theorem_id;
  std::string domain_name;
  std::string band;  // metric that stood in for the Kobayashi distance
  std::vector<FittedConstant> constants;
  double calibration_max_violation = 0.0;
  std::size_t calibration_count = 0;
  std::size_t holdout_count = 0;
  std::size_t holdout_violations = 0;
  double worst_margin = 0.0;  // most negative holdout slack, 0 when clean
  std::size_t excluded = 0;   // pairs dropped (geodesic failures, seam hits)
  bool premise_failed = false;
  CheckStatus status = CheckStatus::failed;
  double runtime_seconds = 0.0;
  std::string note;

  bool pass() const { return status == CheckStatus::passed; }
  double constant(const std::string& name) const;  // fails if absent
};

// Shared sampling knobs. Calibration and holdout halves are drawn from one
// seeded stream and stay disjoint by construction; fitting helpers only ever
// receive the calibration slice. `tolerance` plays two roles: its value is
// the additive slack inside every holdout margin, and a check passes iff the
// holdout violation count is <= tolerance, so the default 1e-6 demands a
// clean holdout while an integer value admits that many outliers.
struct SampleSpec {
  std::size_t calibration = 100;
  std::size_t holdout = 100;
  double depth_min = 1e-4;
  double depth_max = 1e-1;
  double tolerance = 1e-6;
  std::uint64_t seed = 0;
  geodesics::GeodesicOptions geo = geodesics::GeodesicOptions::fast_profile();
  unsigned threads = 0;  // 0 = hardware concurrency
};

// alpha = beta = 0 asks each check to substitute the metric's own exponents.
inline metrics::FinslerBoundParams auto_bounds() {
  metrics::FinslerBoundParams p;
  p.alpha = 0.0;
  p.beta = 0.0;
  return p;
}

// Stratified collar pairs: fiber pairs (one boundary anchor, two depths),
// near-tangential pairs (anchors a short boundary slide apart), and generic
// independent pairs, cycling in that order.
std::vector<std::pair<C2, C2>> sample_collar_pairs(const domain::DomainPtr& dom,
                                                   std::size_t n,
                                                   double depth_min,
                                                   double depth_max,
                                                   std::uint64_t seed,
                                                   bool stratified = true);

// d_F(x,y) >= alpha |log(dx/dy)| - C1 (slow) and F(z,X) >= C2 |X|/delta^beta
// (fmet). Fits the smallest C1 and the largest C2 on calibration. alpha/beta
// of zero pick the metric defaults: catlin alpha=1, beta=1/m; convex-lower
// alpha=1/2, beta=1/m.
enum class SlowFmetPart { slow, fmet, both };
VerificationReport check_slow_fmet(const metrics::MetricPtr& metric,
                                   metrics::FinslerBoundParams params,
                                   const SampleSpec& spec,
                                   SlowFmetPart part = SlowFmetPart::both);

// d_F(x,y) >= 2 alpha log((L^{1/beta} + dx v dy)/sqrt(dx dy)) - C with L the
// Euclidean length of the computed geodesic. `premise` is the slow/fmet
// report; when it failed, this check is skipped, never failed.
VerificationReport check_fin_lower(const metrics::MetricPtr& metric,
                                   metrics::FinslerBoundParams params,
                                   const SampleSpec& spec,
                                   const VerificationReport* premise = nullptr);

// m-convex corollary: d_K >= log((L^m + dx v dy)/sqrt(dx dy)) - C on the
// lower band, plus the m-convexity premise fit delta(z;v) <= C_m delta^{1/m}.
// A premise holdout violation fails the report with the premise flag set.
VerificationReport check_mco(const domain::DomainPtr& dom,
                             const SampleSpec& spec);

// Sandwich g_m - C_lower <= d <= g_1 + C_upper on the glued collar metric.
// Pass a prebuilt catlin metric to reuse its chart cover.
VerificationReport check_dg(const metrics::MetricPtr& catlin_metric,
                            const SampleSpec& spec);

// L(path) <= C |x-y|^{1/m}; quasi = true uses grid-oracle paths as
// quasi-geodesic stand-ins. Also records the proof-internal fit
// H <= C_H (|x-y| + sqrt(dx dy)) where H is the deepest boundary distance
// along the path.
VerificationReport check_gehring_hayman(const metrics::MetricPtr& metric,
                                        const SampleSpec& spec, bool quasi,
                                        std::size_t node_budget = 150000);

// Localization against a halfspace cap: monotonicity d_O <= d_cap holds
// structurally (the cap path is re-measured in the base domain), the additive
// side fits C_add on (d_cap - d_O)/|x-y|^{1/m}, and the ratio side fits
// C_ratio per (loc2). Pairs closer than seam_margin to the cut plane are
// rejected and counted. monotone_only restricts the report to the exact side.
VerificationReport check_localization(const domain::DomainPtr& base,
                                      const C2& cut_normal, double cut_offset,
                                      const SampleSpec& spec,
                                      double seam_margin = 0.15,
                                      bool monotone_only = false);

// Upper bound d_K <= log(1 + A |x-y| / sqrt(dx dy)) with the fitted A clamped
// below at 1 + sqrt(2)/2.
VerificationReport check_up(const domain::DomainPtr& dom,
                            const SampleSpec& spec);
inline constexpr double kUpFloor = 1.7071067811865476;  // 1 + sqrt(2)/2

// Two-sided collar pinch of the glued metric (wraps the metrics-level
// fit/validate into a report).
VerificationReport check_nk(const metrics::MetricPtr& metric,
                            const SampleSpec& spec);

// Suite driver. The spec file is sectioned text: a [theorem_id] header per
// check followed by key = value lines (domain, metric, calibration, holdout,
// depth_min, depth_max, tolerance, seed, and per-check extras such as alpha,
// beta, cut_normal, cut_offset, seam_margin, node_budget). Configuration
// errors fail that check's report and the suite continues.
struct SuiteResult {
  std::vector<VerificationReport> reports;
  bool all_passed = false;  // no report with status == failed
};

SuiteResult run_suite(const std::string& suite_path);

// Rendering. The CSV is deterministic for a fixed spec and seed; a non-empty
// timestamp is appended as an isolated last column on every row.
std::string render_text(const std::vector<VerificationReport>& reports);
std::string render_csv(const std::vector<VerificationReport>& reports,
                       const std::string& timestamp = "");

}  // namespace finsler::harness
