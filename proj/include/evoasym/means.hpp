#pragma once

#include <tuple>
#include <vector>

#include "evoasym/core.hpp"
#include "evoasym/systems.hpp"

namespace evoasym {

/// Time-indexed family {mu_t} of probability measures on [0, infinity).
/// Every supported density is piecewise constant, so integrals against
/// piecewise-linear/constant curves are finite sums of closed-form segment
/// integrals; there is no sampling error anywhere in this module.
class MeasureFamily {
 public:
  enum class Kind {
    kDirac,   // mu_t = delta_t
    kCesaro,  // density (1/t) on [0, t]
    kWindow,  // density (1/w) on [t-w, t], defined for t >= w
    kBlock,   // density n(xi)/alpha(t) on [0, t] with n the indicator of
              // the intervals [2k, 2k+1) and alpha(t) its running integral
  };

  static MeasureFamily dirac();
  static MeasureFamily cesaro();
  static MeasureFamily window(double width);
  static MeasureFamily block();

  Kind kind() const { return kind_; }
  double width() const { return width_; }

  struct DensityPiece {
    double a = 0.0;
    double b = 0.0;
    double rho = 0.0;
  };

  /// Constant-density pieces of mu_t; empty for the Dirac kind. Block
  /// pieces start exactly on even integers so block edges never straddle a
  /// floating-point boundary.
  std::vector<DensityPiece> density(double t) const;

  bool is_atomic() const { return kind_ == Kind::kDirac; }

  /// mu_t([0, p]) in closed form.
  double mass(double p, double t) const;

 private:
  explicit MeasureFamily(Kind kind, double width = 0.0)
      : kind_(kind), width_(width) {}
  Kind kind_;
  double width_;
};

/// Running integral of the block indicator: alpha(t) = integral_0^t n.
double block_alpha(double t);

/// mu_t(v) = integral of v against mu_t; Dirac returns v(t) bitwise.
Vector mean(const MeasureFamily& fam, const SampledCurve& v, double t);

/// mu_t(v_h) = integral of v(h + .) against mu_t; h = 0 reproduces mean
/// bitwise (identical code path).
Vector shifted_mean(const MeasureFamily& fam, const SampledCurve& v, double t,
                    double h);

/// integral_0^inf g(xi) d mu_t(xi + K): the density argument is shifted, so
/// the mass mu_t places on [0, K) is dropped and the result need not be a
/// probability mean.
Vector measure_shift_integral(const MeasureFamily& fam, const SampledCurve& g,
                              double t, double shift);

struct MeanTrace {
  std::vector<double> t;
  std::vector<Vector> values;
  bool cauchy = false;        // pairwise tail distances all below tol
  double max_tail_gap = 0.0;  // largest pairwise distance on the tail
};

/// Trace of mu_t(u) with a Cauchy diagnostic over the tail. The caller is
/// responsible for u being an almost-orbit of sys at its own thresholds.
MeanTrace average_inheritance_trace(const MeasureFamily& fam,
                                    const EvolutionSystem& sys,
                                    const SampledCurve& u,
                                    const std::vector<double>& t_values,
                                    double tail_start, double tol);

struct AlmostConvergenceProfile {
  Vector candidate_limit;  // mu_T(v) at the largest profiled T
  std::vector<std::pair<double, double>> deviation;  // (t, max over h)
  double horizon = 0.0;
  double h_resolution = 0.0;
};

/// deviation(t) = max over h in {0..H_max} of ||mu_t(v_h) - candidate||;
/// almost-convergence is supported when the deviation decays on the tail.
AlmostConvergenceProfile almost_convergence_profile(
    const MeasureFamily& fam, const SampledCurve& v,
    const std::vector<double>& t_values, double h_max, double h_resolution);

struct MassTableRow {
  double t = 0.0;
  double p = 0.0;
  double mass = 0.0;
};

/// Exact masses mu_t([0, p]) for every (t, p) pair.
std::vector<MassTableRow> vanishing_mass_check(const MeasureFamily& fam,
                                               const std::vector<double>& p_list,
                                               const std::vector<double>& t_list);

enum class HypothesisVerdict { kViolated, kConsistent, kInconclusive };

struct HypothesisReport {
  HypothesisVerdict verdict = HypothesisVerdict::kInconclusive;
  Vector limit;              // L, estimated as mu_t(g) at the largest t
  bool limit_cauchy = false; // Cauchy over the top decade of t values
  double unshifted_at_max = 0.0;  // ||mu_{t_max}(g)||, reported for context
  /// (t, K or k-bound, ||shift integral - L||)
  std::vector<std::tuple<double, double, double>> rows;
};

/// Falsifier for the mean-shift stability hypothesis: for each K the trace
/// t -> ||integral g d mu_t(. + K) - L|| must eventually fall below tol.
/// "Consistent" never proves the hypothesis (it quantifies over all g);
/// "violated" is a definite counterexample for this g.
HypothesisReport hypothesis_h_falsify(const MeasureFamily& fam,
                                      const SampledCurve& g,
                                      const std::vector<double>& k_list,
                                      const std::vector<double>& t_list,
                                      double tol);

/// Uniform variant: the deviation at each t is the max over k on a grid of
/// step k_resolution in [0, K]. K = 0 reduces to hypothesis_h_falsify with
/// k_list = {0}.
HypothesisReport hypothesis_hu_falsify(const MeasureFamily& fam,
                                       const SampledCurve& g, double k_max,
                                       double k_resolution,
                                       const std::vector<double>& t_list,
                                       double tol);

}  // namespace evoasym
