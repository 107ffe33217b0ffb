#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "evoasym/errors.hpp"

namespace evoasym {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Euclidean norm with a finiteness check on every coordinate.
double norm(const Vector& x);

bool all_finite(const Vector& x);
void require_finite(const Vector& x, const char* what);

/// Strictly increasing, nonnegative, nonempty list of times.
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> points);

  /// Points start + k*step for k = 0.. while they stay <= stop (+ slack
  /// of half a step quantum so that exact multiples of step land on stop).
  static TimeGrid uniform(double start, double stop, double step);

  const std::vector<double>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  double front() const { return points_.front(); }
  double back() const { return points_.back(); }
  double operator[](std::size_t i) const { return points_[i]; }

 private:
  std::vector<double> points_;
};

enum class Interpolation {
  kPiecewiseConstantLeft,  // sample-and-hold from the left grid point
  kPiecewiseLinear,
};

/// A function [t0, t1] -> R^d known on a finite grid. Evaluation between
/// grid points follows the declared interpolation; evaluation outside the
/// span is an error.
class SampledCurve {
 public:
  SampledCurve(TimeGrid grid, std::vector<Vector> values, Interpolation interp);

  const TimeGrid& grid() const { return grid_; }
  const std::vector<Vector>& values() const { return values_; }
  Interpolation interpolation() const { return interp_; }
  Eigen::Index dimension() const { return values_.front().size(); }
  double span_start() const { return grid_.front(); }
  double span_end() const { return grid_.back(); }

  Vector value_at(double t) const;

  /// Index of the grid segment containing t, i.e. the largest i with
  /// points[i] <= t (and i < size-1 unless t is the last point).
  std::size_t segment_index(double t) const;

 private:
  TimeGrid grid_;
  std::vector<Vector> values_;
  Interpolation interp_;
};

/// Inf/sup of scalar samples restricted to times >= window_start.
struct TailStats {
  double window_start = 0.0;
  double window_end = 0.0;
  double inf_value = 0.0;
  double sup_value = 0.0;
  double oscillation = 0.0;  // sup - inf
};

/// w with w(t) = v(t + h); requires h >= 0 and h within the span of v.
SampledCurve shift_curve(const SampledCurve& v, double h);

/// Needs at least two samples at times >= window_start.
TailStats tail_stats(const std::vector<std::pair<double, double>>& samples,
                     double window_start);

/// Integral of v over [a, b], exact for the declared interpolation
/// (trapezoid per segment for piecewise-linear, rectangle for
/// piecewise-constant-left). Compensated summation keeps the segment
/// accumulation at a few ulps independently of the grid size.
Vector integrate_curve(const SampledCurve& v, double a, double b);

/// Kahan-compensated per-coordinate accumulator; keeps long segment sums at
/// a few ulps independently of the term count.
class CompensatedVectorSum {
 public:
  explicit CompensatedVectorSum(Eigen::Index dim)
      : sum_(Vector::Zero(dim)), comp_(Vector::Zero(dim)) {}

  void add(const Vector& term) {
    for (Eigen::Index i = 0; i < sum_.size(); ++i) {
      const double y = term[i] - comp_[i];
      const double t = sum_[i] + y;
      comp_[i] = (t - sum_[i]) - y;
      sum_[i] = t;
    }
  }

  const Vector& value() const { return sum_; }

 private:
  Vector sum_;
  Vector comp_;
};

/// Shortest decimal string that round-trips a double (17 significant digits).
std::string format_full(double v);

/// CSV with header "t,x0,...,x{d-1}", one row per grid point, full double
/// precision. A nonempty params_comment is written first as "# ..." lines.
void write_curve_csv(const SampledCurve& v, const std::string& path,
                     const std::string& params_comment = "");

/// Deterministic random source used by the sampling probes. Gaussian and
/// uniform draws are hand-rolled from the mt19937_64 bit stream so results
/// do not depend on the standard library's distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();                       // (0, 1)
  double uniform(double lo, double hi);   // (lo, hi)
  double gaussian();                      // standard normal, Box-Muller
  Vector gaussian_vector(Eigen::Index dim);

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace evoasym
