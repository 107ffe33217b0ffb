#include "evoasym/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace evoasym {

namespace {

constexpr double kStationaryTol = 1e-12;
constexpr double kTrendSlack = 1.1;      // 10% multiplicative slack
constexpr double kTrendFloor = 1e-12;    // absolute slack near zero

bool trend_nonincreasing(const std::vector<double>& values) {
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > kTrendSlack * values[i - 1] + kTrendFloor) return false;
  }
  return true;
}

double least_squares_slope(const std::vector<double>& t,
                           const std::vector<double>& y) {
  const std::size_t n = t.size();
  if (n < 2) return 0.0;
  double mt = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mt += t[i];
    my += y[i];
  }
  mt /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (t[i] - mt) * (y[i] - my);
    den += (t[i] - mt) * (t[i] - mt);
  }
  return den > 0.0 ? num / den : 0.0;
}

void require_increasing(const std::vector<double>& v, const char* what) {
  if (v.empty()) throw InvalidInputError(std::string(what) + ": empty time list");
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) {
      throw InvalidInputError(std::string(what) + ": times must be strictly increasing");
    }
  }
}

}  // namespace

std::vector<double> defect_offsets(double horizon, double h_resolution) {
  if (!(horizon > 0.0) || !(h_resolution > 0.0)) {
    throw InvalidInputError("defect offsets: need horizon > 0 and h_res > 0");
  }
  std::vector<double> offsets;
  offsets.push_back(0.0);
  for (std::size_t k = 1;; ++k) {
    const double h = static_cast<double>(k) * h_resolution;
    if (h >= horizon) break;
    offsets.push_back(h);
  }
  offsets.push_back(horizon);
  return offsets;
}

DefectProfile defect_profile(const SampledCurve& u, const EvolutionSystem& sys,
                             const std::vector<double>& t_values, double horizon,
                             double h_resolution) {
  require_increasing(t_values, "defect_profile");
  if (u.dimension() != sys.dimension()) {
    throw DimensionMismatchError("defect_profile: curve/system dimension mismatch");
  }
  const double t_max = t_values.back();
  if (t_values.front() < u.span_start() || t_max + horizon > u.span_end()) {
    throw InvalidInputError(
        "defect_profile: curve span too short for t grid plus horizon");
  }
  const std::vector<double> offsets = defect_offsets(horizon, h_resolution);

  DefectProfile profile;
  profile.t = t_values;
  profile.horizon = horizon;
  profile.h_resolution = h_resolution;
  profile.values.reserve(t_values.size());
  for (double t : t_values) {
    Vector transported = u.value_at(t);
    double psi = 0.0;
    for (std::size_t k = 1; k < offsets.size(); ++k) {
      transported = sys(t + offsets[k], t + offsets[k - 1], transported);
      psi = std::max(psi, (u.value_at(t + offsets[k]) - transported).norm());
    }
    profile.values.push_back(psi);
  }
  return profile;
}

AlmostOrbitVerdict is_almost_orbit(const DefectProfile& profile, double tol,
                                   double tail_start) {
  if (!(tol > 0.0)) throw InvalidInputError("is_almost_orbit: tol must be > 0");
  std::vector<double> tail_t;
  std::vector<double> tail_v;
  for (std::size_t i = 0; i < profile.t.size(); ++i) {
    if (profile.t[i] >= tail_start) {
      tail_t.push_back(profile.t[i]);
      tail_v.push_back(profile.values[i]);
    }
  }
  if (tail_t.size() < 3) {
    throw InsufficientDataError("is_almost_orbit: fewer than 3 samples past tail_start");
  }
  AlmostOrbitVerdict verdict;
  verdict.tail_samples = tail_t.size();
  verdict.max_tail = *std::max_element(tail_v.begin(), tail_v.end());
  verdict.trend_slope = least_squares_slope(tail_t, tail_v);
  verdict.almost_orbit =
      verdict.max_tail <= tol && trend_nonincreasing(tail_v);
  return verdict;
}

namespace {

DefectProfile max_profile_over_seeds(const EvolutionSystem& measured_against,
                                     const EvolutionSystem& orbit_source,
                                     const std::vector<AAESeed>& seeds,
                                     const std::vector<double>& t_values,
                                     double horizon, double h_resolution) {
  DefectProfile combined;
  combined.t = t_values;
  combined.horizon = horizon;
  combined.h_resolution = h_resolution;
  combined.values.assign(t_values.size(), 0.0);
  const double t_end = t_values.back() + horizon;
  for (const AAESeed& seed : seeds) {
    if (seed.t0 > t_values.front()) {
      throw InvalidInputError("aae_check: seed starts after the first profile time");
    }
    const std::size_t points =
        static_cast<std::size_t>(std::ceil((t_end - seed.t0) / h_resolution)) + 2;
    if (points > 20000000) {
      throw InvalidInputError("aae_check: orbit sampling grid too large");
    }
    const TimeGrid grid = TimeGrid::uniform(seed.t0, t_end + h_resolution, h_resolution);
    const Interpolation interp = orbit_source.meta().piecewise_constant
                                     ? Interpolation::kPiecewiseConstantLeft
                                     : Interpolation::kPiecewiseLinear;
    const SampledCurve curve = orbit(orbit_source, seed.t0, seed.x0, grid, interp);
    const DefectProfile single =
        defect_profile(curve, measured_against, t_values, horizon, h_resolution);
    for (std::size_t i = 0; i < combined.values.size(); ++i) {
      combined.values[i] = std::max(combined.values[i], single.values[i]);
    }
  }
  return combined;
}

}  // namespace

AAEReport aae_check(const EvolutionSystem& u_sys, const EvolutionSystem& v_sys,
                    const std::vector<AAESeed>& seeds,
                    const std::vector<double>& t_values, double horizon,
                    double h_resolution, double tol, double tail_start) {
  if (u_sys.dimension() != v_sys.dimension()) {
    throw DimensionMismatchError("aae_check: systems must share dimension");
  }
  if (seeds.empty()) throw InvalidInputError("aae_check: no seeds");
  require_increasing(t_values, "aae_check");

  AAEReport report;
  report.tol = tol;
  report.tail_start = tail_start;
  report.forward = max_profile_over_seeds(u_sys, v_sys, seeds, t_values, horizon,
                                          h_resolution);
  report.backward = max_profile_over_seeds(v_sys, u_sys, seeds, t_values, horizon,
                                           h_resolution);
  const bool fwd = is_almost_orbit(report.forward, tol, tail_start).almost_orbit;
  const bool bwd = is_almost_orbit(report.backward, tol, tail_start).almost_orbit;
  report.verdict = fwd && bwd   ? AAEVerdict::kSupported
                   : fwd        ? AAEVerdict::kForwardOnly
                   : bwd        ? AAEVerdict::kBackwardOnly
                                : AAEVerdict::kUnsupported;
  return report;
}

SampledCurve perturb_to_almost_orbit(const SampledCurve& u,
                                     const Forcing& perturbation) {
  std::vector<Vector> values;
  values.reserve(u.grid().size());
  for (std::size_t i = 0; i < u.grid().size(); ++i) {
    values.push_back(u.values()[i] +
                     perturbation.value_at(u.grid()[i], u.dimension()));
  }
  return SampledCurve(u.grid(), std::move(values), u.interpolation());
}

namespace {

PointClass classify_point(const std::vector<std::pair<double, double>>& defect_at,
                          double tol) {
  double overall_max = 0.0;
  for (const auto& [t, d] : defect_at) overall_max = std::max(overall_max, d);
  if (overall_max <= kStationaryTol) return PointClass::kStationary;

  const double first = defect_at.front().first;
  const double last = defect_at.back().first;
  const double tail_from = first + 0.5 * (last - first);
  std::vector<double> tail;
  for (const auto& [t, d] : defect_at) {
    if (t >= tail_from) tail.push_back(d);
  }
  const double tail_max =
      tail.empty() ? overall_max : *std::max_element(tail.begin(), tail.end());
  if (tail_max <= tol && trend_nonincreasing(tail)) {
    return PointClass::kAlmostStationary;
  }
  return PointClass::kNeither;
}

}  // namespace

std::vector<ASPReport> asp_scan(const EvolutionSystem& sys,
                                const std::vector<Vector>& points,
                                const std::vector<double>& t_values,
                                double horizon, double h_resolution, double tol) {
  require_increasing(t_values, "asp_scan");
  const std::vector<double> offsets = defect_offsets(horizon, h_resolution);
  std::vector<ASPReport> reports;
  reports.reserve(points.size());
  for (const Vector& x : points) {
    ASPReport report;
    report.point = x;
    for (double t : t_values) {
      Vector transported = x;
      double defect = 0.0;
      for (std::size_t k = 1; k < offsets.size(); ++k) {
        transported = sys(t + offsets[k], t + offsets[k - 1], transported);
        defect = std::max(defect, (transported - x).norm());
      }
      report.defect_at.emplace_back(t, defect);
    }
    report.classification = classify_point(report.defect_at, tol);
    reports.push_back(std::move(report));
  }
  return reports;
}

bool asp_midpoint_test(const EvolutionSystem& sys, const Vector& x1,
                       const Vector& x2, const std::vector<double>& lambdas,
                       const std::vector<double>& t_values, double horizon,
                       double h_resolution, double tol) {
  for (double lam : lambdas) {
    if (!(0.0 <= lam && lam <= 1.0)) {
      throw InvalidInputError("asp_midpoint_test: lambdas must lie in [0, 1]");
    }
  }
  const auto endpoint_reports =
      asp_scan(sys, {x1, x2}, t_values, horizon, h_resolution, tol);
  for (const ASPReport& r : endpoint_reports) {
    if (r.classification == PointClass::kNeither) {
      throw InvalidInputError(
          "asp_midpoint_test: endpoints must classify almost-stationary");
    }
  }
  std::vector<Vector> combos;
  combos.reserve(lambdas.size());
  for (double lam : lambdas) combos.push_back(lam * x1 + (1.0 - lam) * x2);
  for (const ASPReport& r :
       asp_scan(sys, combos, t_values, horizon, h_resolution, tol)) {
    if (r.classification == PointClass::kNeither) return false;
  }
  return true;
}

namespace {

// Distance samples on the grid of u1 restricted to the common span and tail.
std::vector<std::pair<double, double>> distance_samples(const SampledCurve& u1,
                                                        const SampledCurve& u2,
                                                        double tail_start) {
  if (u1.dimension() != u2.dimension()) {
    throw DimensionMismatchError("distance trace: curves must share dimension");
  }
  const double lo = std::max({tail_start, u1.span_start(), u2.span_start()});
  const double hi = std::min(u1.span_end(), u2.span_end());
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < u1.grid().size(); ++i) {
    const double t = u1.grid()[i];
    if (t < lo || t > hi) continue;
    out.emplace_back(t, (u1.values()[i] - u2.value_at(t)).norm());
  }
  return out;
}

}  // namespace

DistanceTrace sces_consequence_check(const EvolutionSystem& sys,
                                     const SampledCurve& u1,
                                     const SampledCurve& u2, double tail_start,
                                     double tol) {
  if (u1.dimension() != sys.dimension()) {
    throw DimensionMismatchError("sces_consequence_check: dimension mismatch");
  }
  DistanceTrace result;
  result.trace = distance_samples(u1, u2, tail_start);
  if (result.trace.empty()) {
    throw InsufficientDataError("sces_consequence_check: no tail samples");
  }
  result.ok = std::all_of(result.trace.begin(), result.trace.end(),
                          [tol](const auto& p) { return p.second <= tol; });
  return result;
}

DistanceWindowCheck distance_window_check(const SampledCurve& u1,
                                          const SampledCurve& u2, double m,
                                          double tail_start) {
  if (!(m > 0.0)) throw InvalidInputError("distance_window_check: M must be > 0");
  const auto samples = distance_samples(u1, u2, tail_start);
  if (samples.size() < 2) {
    throw InsufficientDataError("distance_window_check: fewer than 2 tail samples");
  }
  DistanceWindowCheck check;
  check.tail_sup = -std::numeric_limits<double>::infinity();
  check.tail_inf = std::numeric_limits<double>::infinity();
  for (const auto& [t, d] : samples) {
    check.tail_sup = std::max(check.tail_sup, d);
    check.tail_inf = std::min(check.tail_inf, d);
  }
  check.oscillation = check.tail_sup - check.tail_inf;
  check.holds = check.tail_sup <= m * check.tail_inf + 1e-6;
  return check;
}

std::vector<Vector> cluster_points(const SampledCurve& u, double tail_start,
                                   double eps) {
  if (!(eps > 0.0)) throw InvalidInputError("cluster_points: eps must be > 0");
  std::vector<Vector> centers;
  std::size_t tail_count = 0;
  for (std::size_t i = 0; i < u.grid().size(); ++i) {
    if (u.grid()[i] < tail_start) continue;
    ++tail_count;
    const Vector& x = u.values()[i];
    bool covered = false;
    for (const Vector& c : centers) {
      if ((x - c).norm() <= eps) {
        covered = true;
        break;
      }
    }
    if (!covered) centers.push_back(x);
  }
  if (tail_count < 10) {
    throw InsufficientDataError("cluster_points: fewer than 10 tail samples");
  }
  return centers;
}

std::vector<OmegaTraceRow> omega_invariance_check(
    const EvolutionSystem& sys, const SampledCurve& u, const Vector& x_star,
    const std::vector<double>& s_times, bool gap_growth, double tol) {
  require_increasing(s_times, "omega_invariance_check");
  if (s_times.size() < 3) {
    throw InsufficientDataError("omega_invariance_check: need at least 3 s times");
  }
  // the sampled subsequence must approach x_star
  const std::size_t check_from = s_times.size() >= 3 ? s_times.size() - 3 : 0;
  for (std::size_t i = check_from; i < s_times.size(); ++i) {
    if ((u.value_at(s_times[i]) - x_star).norm() > tol) {
      throw InvalidInputError(
          "omega_invariance_check: u(s_n) does not approach x_star within tol");
    }
  }
  std::vector<OmegaTraceRow> rows;
  for (std::size_t n = 1; n < s_times.size(); ++n) {
    const std::size_t target = gap_growth ? 2 * n : n + 1;
    if (target >= s_times.size()) break;
    OmegaTraceRow row;
    row.s = s_times[n];
    row.t = s_times[target];
    row.orbit_gap = (sys(row.t, row.s, u.value_at(row.s)) - x_star).norm();
    row.point_gap = (sys(row.t, row.s, x_star) - x_star).norm();
    rows.push_back(row);
  }
  if (rows.empty()) {
    throw InsufficientDataError("omega_invariance_check: s list too short for the gap rule");
  }
  return rows;
}

std::vector<std::pair<double, double>> modulus_of_continuity(
    const SampledCurve& u, const std::vector<double>& delta_list,
    double tail_start) {
  if (delta_list.empty()) {
    throw InvalidInputError("modulus_of_continuity: empty delta list");
  }
  double min_delta = std::numeric_limits<double>::infinity();
  for (double d : delta_list) {
    if (!(d > 0.0)) throw InvalidInputError("modulus_of_continuity: deltas must be > 0");
    min_delta = std::min(min_delta, d);
  }
  std::vector<std::size_t> tail_idx;
  for (std::size_t i = 0; i < u.grid().size(); ++i) {
    if (u.grid()[i] >= tail_start) tail_idx.push_back(i);
  }
  if (tail_idx.size() < 2) {
    throw InsufficientDataError("modulus_of_continuity: fewer than 2 tail samples");
  }
  for (std::size_t k = 1; k < tail_idx.size(); ++k) {
    if (u.grid()[tail_idx[k]] - u.grid()[tail_idx[k - 1]] > min_delta) {
      throw InvalidInputError("modulus_of_continuity: grid resolution too coarse");
    }
  }
  std::vector<std::pair<double, double>> out;
  for (double delta : delta_list) {
    double sup = 0.0;
    for (std::size_t a = 0; a < tail_idx.size(); ++a) {
      for (std::size_t b = a + 1; b < tail_idx.size(); ++b) {
        if (u.grid()[tail_idx[b]] - u.grid()[tail_idx[a]] > delta) break;
        sup = std::max(sup, (u.values()[tail_idx[a]] - u.values()[tail_idx[b]]).norm());
      }
    }
    out.emplace_back(delta, sup);
  }
  return out;
}

}  // namespace evoasym
