#include "evoasym/means.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evoasym/asymptotics.hpp"  // defect_offsets

namespace evoasym {

MeasureFamily MeasureFamily::dirac() { return MeasureFamily(Kind::kDirac); }
MeasureFamily MeasureFamily::cesaro() { return MeasureFamily(Kind::kCesaro); }

MeasureFamily MeasureFamily::window(double width) {
  if (!(width > 0.0)) throw InvalidInputError("MeasureFamily::window: width must be > 0");
  return MeasureFamily(Kind::kWindow, width);
}

MeasureFamily MeasureFamily::block() { return MeasureFamily(Kind::kBlock); }

double block_alpha(double t) {
  if (!(t >= 0.0)) throw InvalidInputError("block_alpha: t must be >= 0");
  const double pairs = std::floor(t / 2.0);
  const double frac = t - 2.0 * pairs;
  return pairs + std::min(frac, 1.0);
}

std::vector<MeasureFamily::DensityPiece> MeasureFamily::density(double t) const {
  switch (kind_) {
    case Kind::kDirac:
      return {};
    case Kind::kCesaro: {
      if (!(t > 0.0)) throw InvalidInputError("cesaro density: t must be > 0");
      return {{0.0, t, 1.0 / t}};
    }
    case Kind::kWindow: {
      if (!(t >= width_)) {
        throw InvalidInputError("window density: t must be >= the window width");
      }
      return {{t - width_, t, 1.0 / width_}};
    }
    case Kind::kBlock: {
      if (!(t > 0.0)) throw InvalidInputError("block density: t must be > 0");
      const double rho = 1.0 / block_alpha(t);
      std::vector<DensityPiece> pieces;
      for (double lo = 0.0; lo < t; lo += 2.0) {
        const double hi = std::min(lo + 1.0, t);
        if (hi > lo) pieces.push_back({lo, hi, rho});
      }
      return pieces;
    }
  }
  throw InvalidInputError("MeasureFamily: unknown kind");
}

double MeasureFamily::mass(double p, double t) const {
  if (!(p >= 0.0)) throw InvalidInputError("MeasureFamily::mass: p must be >= 0");
  switch (kind_) {
    case Kind::kDirac:
      return t <= p ? 1.0 : 0.0;
    case Kind::kCesaro: {
      if (!(t > 0.0)) throw InvalidInputError("cesaro mass: t must be > 0");
      return std::min(p, t) / t;
    }
    case Kind::kWindow: {
      if (!(t >= width_)) {
        throw InvalidInputError("window mass: t must be >= the window width");
      }
      const double overlap = std::min(p, t) - (t - width_);
      return std::max(0.0, overlap) / width_;
    }
    case Kind::kBlock: {
      if (!(t > 0.0)) throw InvalidInputError("block mass: t must be > 0");
      return block_alpha(std::min(p, t)) / block_alpha(t);
    }
  }
  throw InvalidInputError("MeasureFamily: unknown kind");
}

namespace {

// Shared quadrature: integral of v(h + .) against the density pieces of
// mu_t, each piece evaluated exactly by integrate_curve.
Vector density_mean(const MeasureFamily& fam, const SampledCurve& v, double t,
                    double h) {
  CompensatedVectorSum acc(v.dimension());
  for (const auto& piece : fam.density(t)) {
    acc.add(piece.rho * integrate_curve(v, piece.a + h, piece.b + h));
  }
  return acc.value();
}

}  // namespace

Vector mean(const MeasureFamily& fam, const SampledCurve& v, double t) {
  return shifted_mean(fam, v, t, 0.0);
}

Vector shifted_mean(const MeasureFamily& fam, const SampledCurve& v, double t,
                    double h) {
  if (!(h >= 0.0)) throw InvalidInputError("shifted_mean: h must be >= 0");
  if (fam.is_atomic()) return v.value_at(t + h);
  return density_mean(fam, v, t, h);
}

Vector measure_shift_integral(const MeasureFamily& fam, const SampledCurve& g,
                              double t, double shift) {
  if (!(shift >= 0.0)) {
    throw InvalidInputError("measure_shift_integral: shift must be >= 0");
  }
  if (fam.is_atomic()) {
    const double xi = t - shift;
    return xi >= 0.0 ? g.value_at(xi) : Vector(Vector::Zero(g.dimension()));
  }
  CompensatedVectorSum acc(g.dimension());
  for (const auto& piece : fam.density(t)) {
    const double a = std::max(0.0, piece.a - shift);
    const double b = piece.b - shift;
    if (b <= a) continue;  // the mass below the shift is dropped
    acc.add(piece.rho * integrate_curve(g, a, b));
  }
  return acc.value();
}

MeanTrace average_inheritance_trace(const MeasureFamily& fam,
                                    const EvolutionSystem& sys,
                                    const SampledCurve& u,
                                    const std::vector<double>& t_values,
                                    double tail_start, double tol) {
  if (u.dimension() != sys.dimension()) {
    throw DimensionMismatchError("average_inheritance_trace: dimension mismatch");
  }
  if (t_values.empty()) {
    throw InvalidInputError("average_inheritance_trace: empty t grid");
  }
  MeanTrace trace;
  trace.t = t_values;
  trace.values.reserve(t_values.size());
  for (double t : t_values) trace.values.push_back(mean(fam, u, t));

  std::vector<const Vector*> tail;
  for (std::size_t i = 0; i < trace.t.size(); ++i) {
    if (trace.t[i] >= tail_start) tail.push_back(&trace.values[i]);
  }
  double max_gap = 0.0;
  for (std::size_t i = 0; i < tail.size(); ++i) {
    for (std::size_t j = i + 1; j < tail.size(); ++j) {
      max_gap = std::max(max_gap, (*tail[i] - *tail[j]).norm());
    }
  }
  trace.max_tail_gap = max_gap;
  trace.cauchy = tail.size() >= 2 && max_gap <= tol;
  return trace;
}

AlmostConvergenceProfile almost_convergence_profile(
    const MeasureFamily& fam, const SampledCurve& v,
    const std::vector<double>& t_values, double h_max, double h_resolution) {
  if (t_values.empty()) {
    throw InvalidInputError("almost_convergence_profile: empty t grid");
  }
  const std::vector<double> offsets = defect_offsets(h_max, h_resolution);
  AlmostConvergenceProfile profile;
  profile.horizon = h_max;
  profile.h_resolution = h_resolution;
  profile.candidate_limit = mean(fam, v, t_values.back());
  for (double t : t_values) {
    double deviation = 0.0;
    for (double h : offsets) {
      deviation = std::max(
          deviation, (shifted_mean(fam, v, t, h) - profile.candidate_limit).norm());
    }
    profile.deviation.emplace_back(t, deviation);
  }
  return profile;
}

std::vector<MassTableRow> vanishing_mass_check(const MeasureFamily& fam,
                                               const std::vector<double>& p_list,
                                               const std::vector<double>& t_list) {
  std::vector<MassTableRow> table;
  table.reserve(p_list.size() * t_list.size());
  for (double p : p_list) {
    for (double t : t_list) {
      table.push_back({t, p, fam.mass(p, t)});
    }
  }
  return table;
}

namespace {

struct LimitEstimate {
  Vector limit;
  bool cauchy = false;
  std::vector<double> tail_t;  // top decade of t values
};

LimitEstimate estimate_limit(const MeasureFamily& fam, const SampledCurve& g,
                             const std::vector<double>& t_list, double tol) {
  if (t_list.size() < 2) {
    throw InvalidInputError("hypothesis falsifier: need at least 2 t values");
  }
  for (std::size_t i = 1; i < t_list.size(); ++i) {
    if (!(t_list[i] > t_list[i - 1])) {
      throw InvalidInputError("hypothesis falsifier: t values must be increasing");
    }
  }
  LimitEstimate est;
  const double t_max = t_list.back();
  est.limit = mean(fam, g, t_max);
  double worst = 0.0;
  for (double t : t_list) {
    if (t < t_max / 10.0) continue;
    est.tail_t.push_back(t);
    worst = std::max(worst, (mean(fam, g, t) - est.limit).norm());
  }
  est.cauchy = est.tail_t.size() >= 1 && worst <= tol;
  return est;
}

}  // namespace

HypothesisReport hypothesis_h_falsify(const MeasureFamily& fam,
                                      const SampledCurve& g,
                                      const std::vector<double>& k_list,
                                      const std::vector<double>& t_list,
                                      double tol) {
  if (k_list.empty()) throw InvalidInputError("hypothesis_h_falsify: empty K list");
  const LimitEstimate est = estimate_limit(fam, g, t_list, tol);

  HypothesisReport report;
  report.limit = est.limit;
  report.limit_cauchy = est.cauchy;
  report.unshifted_at_max = est.limit.norm();

  bool violated = false;
  for (double k : k_list) {
    double tail_min = std::numeric_limits<double>::infinity();
    for (double t : t_list) {
      const double dev = (measure_shift_integral(fam, g, t, k) - est.limit).norm();
      report.rows.emplace_back(t, k, dev);
      if (t >= est.tail_t.front()) tail_min = std::min(tail_min, dev);
    }
    if (tail_min > tol) violated = true;  // the trace stays above tol on the tail
  }
  if (!est.cauchy) {
    report.verdict = HypothesisVerdict::kInconclusive;
  } else {
    report.verdict =
        violated ? HypothesisVerdict::kViolated : HypothesisVerdict::kConsistent;
  }
  return report;
}

HypothesisReport hypothesis_hu_falsify(const MeasureFamily& fam,
                                       const SampledCurve& g, double k_max,
                                       double k_resolution,
                                       const std::vector<double>& t_list,
                                       double tol) {
  if (!(k_max >= 0.0)) {
    throw InvalidInputError("hypothesis_hu_falsify: K must be >= 0");
  }
  const std::vector<double> k_grid =
      k_max == 0.0 ? std::vector<double>{0.0} : defect_offsets(k_max, k_resolution);
  const LimitEstimate est = estimate_limit(fam, g, t_list, tol);

  HypothesisReport report;
  report.limit = est.limit;
  report.limit_cauchy = est.cauchy;
  report.unshifted_at_max = est.limit.norm();

  double tail_min = std::numeric_limits<double>::infinity();
  for (double t : t_list) {
    double dev = 0.0;
    for (double k : k_grid) {
      dev = std::max(dev,
                     (measure_shift_integral(fam, g, t, k) - est.limit).norm());
    }
    report.rows.emplace_back(t, k_max, dev);
    if (t >= est.tail_t.front()) tail_min = std::min(tail_min, dev);
  }
  if (!est.cauchy) {
    report.verdict = HypothesisVerdict::kInconclusive;
  } else {
    report.verdict = tail_min > tol ? HypothesisVerdict::kViolated
                                    : HypothesisVerdict::kConsistent;
  }
  return report;
}

}  // namespace evoasym
