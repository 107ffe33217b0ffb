#include "evoasym/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace evoasym {

bool all_finite(const Vector& x) {
  return x.allFinite();
}

void require_finite(const Vector& x, const char* what) {
  if (!x.allFinite()) {
    throw InvalidInputError(std::string(what) + ": non-finite coordinate");
  }
}

double norm(const Vector& x) {
  require_finite(x, "norm");
  return x.norm();
}

TimeGrid::TimeGrid(std::vector<double> points) : points_(std::move(points)) {
  if (points_.empty()) throw InvalidInputError("TimeGrid: empty");
  if (points_.front() < 0.0 || !std::isfinite(points_.front())) {
    throw InvalidInputError("TimeGrid: times must be finite and >= 0");
  }
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (!(points_[i] > points_[i - 1]) || !std::isfinite(points_[i])) {
      throw InvalidInputError("TimeGrid: times must be strictly increasing");
    }
  }
}

TimeGrid TimeGrid::uniform(double start, double stop, double step) {
  if (!(step > 0.0) || !(stop >= start) || start < 0.0) {
    throw InvalidInputError("TimeGrid::uniform: need start >= 0, stop >= start, step > 0");
  }
  std::vector<double> pts;
  const double slack = 0.5 * step;
  for (std::size_t k = 0;; ++k) {
    const double t = start + static_cast<double>(k) * step;
    if (t > stop + slack * 1e-9) break;
    // clamp the last point onto stop when it overshoots by rounding only
    pts.push_back(std::min(t, stop));
    if (pts.size() > 1 && pts.back() <= pts[pts.size() - 2]) {
      pts.pop_back();
      break;
    }
  }
  return TimeGrid(std::move(pts));
}

SampledCurve::SampledCurve(TimeGrid grid, std::vector<Vector> values,
                           Interpolation interp)
    : grid_(std::move(grid)), values_(std::move(values)), interp_(interp) {
  if (values_.size() != grid_.size()) {
    throw InvalidInputError("SampledCurve: values/grid length mismatch");
  }
  const Eigen::Index d = values_.front().size();
  if (d < 1) throw InvalidInputError("SampledCurve: dimension must be >= 1");
  for (const Vector& v : values_) {
    if (v.size() != d) {
      throw DimensionMismatchError("SampledCurve: mixed dimensions");
    }
    require_finite(v, "SampledCurve");
  }
}

std::size_t SampledCurve::segment_index(double t) const {
  const auto& p = grid_.points();
  if (t < p.front() || t > p.back()) {
    throw InvalidInputError("SampledCurve: evaluation outside span");
  }
  auto it = std::upper_bound(p.begin(), p.end(), t);
  std::size_t i = static_cast<std::size_t>(it - p.begin());
  if (i > 0) --i;
  if (i == p.size() - 1 && p.size() > 1) --i;  // t == back lands in last segment
  return i;
}

Vector SampledCurve::value_at(double t) const {
  const auto& p = grid_.points();
  if (t < p.front() || t > p.back()) {
    throw InvalidInputError("SampledCurve: evaluation outside span");
  }
  if (p.size() == 1) return values_.front();
  const std::size_t i = segment_index(t);
  if (interp_ == Interpolation::kPiecewiseConstantLeft) {
    return (t >= p[i + 1]) ? values_[i + 1] : values_[i];
  }
  const double len = p[i + 1] - p[i];
  const double theta = (t - p[i]) / len;
  return (1.0 - theta) * values_[i] + theta * values_[i + 1];
}

SampledCurve shift_curve(const SampledCurve& v, double h) {
  if (!(h >= 0.0)) throw InvalidInputError("shift_curve: h must be >= 0");
  if (h == 0.0) return v;
  const auto& p = v.grid().points();
  if (h > v.span_end()) {
    throw InvalidInputError("shift_curve: h beyond curve span");
  }
  std::vector<double> pts;
  std::vector<Vector> vals;
  if (h >= v.span_start()) {
    // new time 0 maps to absolute time h inside the old span
    pts.push_back(0.0);
    vals.push_back(v.value_at(h));
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > h) {
      pts.push_back(p[i] - h);
      vals.push_back(v.values()[i]);
    }
  }
  return SampledCurve(TimeGrid(std::move(pts)), std::move(vals),
                      v.interpolation());
}

TailStats tail_stats(const std::vector<std::pair<double, double>>& samples,
                     double window_start) {
  TailStats out;
  out.window_start = window_start;
  out.inf_value = std::numeric_limits<double>::infinity();
  out.sup_value = -std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  double last_t = window_start;
  for (const auto& [t, x] : samples) {
    if (t < window_start) continue;
    ++count;
    last_t = std::max(last_t, t);
    out.inf_value = std::min(out.inf_value, x);
    out.sup_value = std::max(out.sup_value, x);
  }
  if (count < 2) {
    throw InsufficientDataError("tail_stats: fewer than 2 samples past window_start");
  }
  out.window_end = last_t;
  out.oscillation = out.sup_value - out.inf_value;
  return out;
}

Vector integrate_curve(const SampledCurve& v, double a, double b) {
  if (!(0.0 <= a) || !(a <= b)) {
    throw InvalidInputError("integrate_curve: need 0 <= a <= b");
  }
  if (a < v.span_start() || b > v.span_end()) {
    throw InvalidInputError("integrate_curve: [a,b] outside curve span");
  }
  const Eigen::Index d = v.dimension();
  if (a == b) return Vector::Zero(d);

  const auto& p = v.grid().points();
  const auto& vals = v.values();
  CompensatedVectorSum acc(d);
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    const double lo = std::max(a, p[i]);
    const double hi = std::min(b, p[i + 1]);
    if (hi <= lo) continue;
    const double len = hi - lo;
    if (v.interpolation() == Interpolation::kPiecewiseConstantLeft) {
      acc.add(len * vals[i]);
    } else {
      const double seg = p[i + 1] - p[i];
      const double tl = (lo - p[i]) / seg;
      const double th = (hi - p[i]) / seg;
      const Vector vlo = (1.0 - tl) * vals[i] + tl * vals[i + 1];
      const Vector vhi = (1.0 - th) * vals[i] + th * vals[i + 1];
      acc.add((0.5 * len) * (vlo + vhi));
    }
  }
  return acc.value();
}

std::string format_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_curve_csv(const SampledCurve& v, const std::string& path,
                     const std::string& params_comment) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("write_curve_csv: cannot open " + path);
  if (!params_comment.empty()) out << "# " << params_comment << "\n";
  out << "t";
  for (Eigen::Index j = 0; j < v.dimension(); ++j) out << ",x" << j;
  out << "\n";
  for (std::size_t i = 0; i < v.grid().size(); ++i) {
    out << format_full(v.grid()[i]);
    for (Eigen::Index j = 0; j < v.dimension(); ++j) {
      out << "," << format_full(v.values()[i][j]);
    }
    out << "\n";
  }
  if (!out) throw InvalidInputError("write_curve_csv: write failed for " + path);
}

double Rng::uniform() {
  // 53 random bits in (0, 1); never returns an exact endpoint
  const std::uint64_t bits = engine_() >> 11;
  double u = (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  return u;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double Rng::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

Vector Rng::gaussian_vector(Eigen::Index dim) {
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = gaussian();
  return v;
}

}  // namespace evoasym
