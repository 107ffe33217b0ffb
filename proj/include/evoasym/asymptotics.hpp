#pragma once

#include <utility>
#include <vector>

#include "evoasym/core.hpp"
#include "evoasym/operators.hpp"
#include "evoasym/systems.hpp"

namespace evoasym {

/// psi(t) = max over h in {0, h_res, 2 h_res, ..., H} of
/// ||u(t+h) - U(t+h, t) u(t)||, the truncated almost-orbit defect. The
/// truncation parameters travel with the profile; they are the dominant
/// approximation and must never be implicit.
struct DefectProfile {
  std::vector<double> t;
  double horizon = 0.0;       // H
  double h_resolution = 0.0;  // h grid step; H itself is always included
  std::vector<double> values;
};

DefectProfile defect_profile(const SampledCurve& u, const EvolutionSystem& sys,
                             const std::vector<double>& t_values, double horizon,
                             double h_resolution);

struct AlmostOrbitVerdict {
  bool almost_orbit = false;
  double max_tail = 0.0;     // largest psi on the tail
  double trend_slope = 0.0;  // least-squares slope of psi over the tail
  std::size_t tail_samples = 0;
};

/// True iff every tail value is <= tol and the tail is nonincreasing up to
/// 10% multiplicative slack. Needs at least 3 profile samples past
/// tail_start.
AlmostOrbitVerdict is_almost_orbit(const DefectProfile& profile, double tol,
                                   double tail_start);

enum class AAEVerdict { kSupported, kForwardOnly, kBackwardOnly, kUnsupported };

struct AAESeed {
  double t0 = 0.0;
  Vector x0;
};

struct AAEReport {
  DefectProfile forward;   // orbits of V measured as almost-orbits of U
  DefectProfile backward;  // roles swapped
  AAEVerdict verdict = AAEVerdict::kUnsupported;
  double tol = 0.0;
  double tail_start = 0.0;
};

/// Runs every seed orbit of V through defect_profile against U (and the
/// reverse), takes the pointwise max over seeds, and grades both profiles
/// with is_almost_orbit at (tol, tail_start). Orbits are sampled on a
/// uniform grid of step h_resolution over [t0, max t + horizon].
AAEReport aae_check(const EvolutionSystem& u_sys, const EvolutionSystem& v_sys,
                    const std::vector<AAESeed>& seeds,
                    const std::vector<double>& t_values, double horizon,
                    double h_resolution, double tol, double tail_start);

/// v(t) = u(t) + perturbation(t) on the grid of u. The perturbation must be
/// a declared-decaying forcing (power decay of any positive order) or a
/// user-supplied curve; whether v is again an almost-orbit is measured
/// downstream, never assumed.
SampledCurve perturb_to_almost_orbit(const SampledCurve& u,
                                     const Forcing& perturbation);

enum class PointClass { kStationary, kAlmostStationary, kNeither };

struct ASPReport {
  Vector point;
  std::vector<std::pair<double, double>> defect_at;  // (t, sup_h ||U(t+h,t)x - x||)
  PointClass classification = PointClass::kNeither;
};

/// Stationary: defect <= 1e-12 at every t. Almost-stationary: defect <= tol
/// and nonincreasing (10% slack) on the tail half of t_values.
std::vector<ASPReport> asp_scan(const EvolutionSystem& sys,
                                const std::vector<Vector>& points,
                                const std::vector<double>& t_values,
                                double horizon, double h_resolution, double tol);

/// Both endpoints must already classify (almost-)stationary at the same
/// thresholds; true iff every convex combination lambda*x1 + (1-lambda)*x2
/// classifies (almost-)stationary as well.
bool asp_midpoint_test(const EvolutionSystem& sys, const Vector& x1,
                       const Vector& x2, const std::vector<double>& lambdas,
                       const std::vector<double>& t_values, double horizon,
                       double h_resolution, double tol);

struct DistanceTrace {
  bool ok = false;
  std::vector<std::pair<double, double>> trace;  // (t, ||u1(t) - u2(t)||)
};

/// ||u1(t) - u2(t)|| <= tol on the tail. Callers are responsible for having
/// profiled the system strongly contracting and both curves almost-orbits;
/// this function checks the distances only.
DistanceTrace sces_consequence_check(const EvolutionSystem& sys,
                                     const SampledCurve& u1,
                                     const SampledCurve& u2, double tail_start,
                                     double tol);

struct DistanceWindowCheck {
  bool holds = false;
  double tail_sup = 0.0;
  double tail_inf = 0.0;
  double oscillation = 0.0;  // tail_sup - tail_inf, the limit-existence surrogate
};

/// Finite-window surrogate of the two-sided distance bound for almost-orbit
/// pairs of an M-Lipschitz system: tail sup ||u1-u2|| <= M * tail inf + 1e-6.
/// For M = 1 the reported oscillation doubles as the existence surrogate for
/// lim ||u1 - u2||.
DistanceWindowCheck distance_window_check(const SampledCurve& u1,
                                          const SampledCurve& u2, double m,
                                          double tail_start);

/// Centers of a greedy first-fit eps-net over the tail samples, in sample
/// order; deterministic given the curve.
std::vector<Vector> cluster_points(const SampledCurve& u, double tail_start,
                                   double eps);

struct OmegaTraceRow {
  double s = 0.0;
  double t = 0.0;
  double orbit_gap = 0.0;  // ||U(t,s) u(s) - x*||
  double point_gap = 0.0;  // ||U(t,s) x* - x*||
};

/// Builds t_n = s_{n + phi(n)} with phi(n) = n when gap_growth (so
/// t_n - s_n grows without bound) and phi = 1 otherwise, and traces both
/// invariance gaps. The sampled subsequence u(s_n) must approach x_star
/// within tol at its end.
std::vector<OmegaTraceRow> omega_invariance_check(
    const EvolutionSystem& sys, const SampledCurve& u, const Vector& x_star,
    const std::vector<double>& s_times, bool gap_growth, double tol);

/// Empirical modulus of continuity on the tail: for each delta the sup of
/// ||u(t) - u(s)|| over sample pairs with |t - s| <= delta. The tail sample
/// spacing must not exceed the smallest delta.
std::vector<std::pair<double, double>> modulus_of_continuity(
    const SampledCurve& u, const std::vector<double>& delta_list,
    double tail_start);

/// h offsets {0, h_res, 2 h_res, ...} up to horizon, with the horizon itself
/// always included as the last offset.
std::vector<double> defect_offsets(double horizon, double h_resolution);

}  // namespace evoasym
