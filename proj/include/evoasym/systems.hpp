#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "evoasym/core.hpp"
#include "evoasym/operators.hpp"

namespace evoasym {

struct SystemMeta {
  std::optional<double> claimed_lipschitz;  // uniform Lipschitz claim M
  bool autonomous = false;
  bool piecewise_constant = false;  // stepped evaluator, constant between anchors
  std::string description;
  Eigen::Index dimension = 0;
};

/// Two-parameter evolution map U(t,s), t >= s >= 0, with U(t,t) = x and the
/// composition law U(t,s)U(s,r) = U(t,r). Stepped constructors (flows on an
/// anchored grid, resolvent products) satisfy both laws bitwise because
/// evaluation always replays the same absolute step sequence; closed-form
/// constructors satisfy them to machine precision.
class EvolutionSystem {
 public:
  using Evaluator = std::function<Vector(double t, double s, const Vector& x)>;

  EvolutionSystem(Evaluator evaluator, SystemMeta meta)
      : evaluator_(std::move(evaluator)), meta_(std::move(meta)) {}

  const SystemMeta& meta() const { return meta_; }
  Eigen::Index dimension() const { return meta_.dimension; }

  /// U(t,s)x; throws for t < s, s < 0, or a dimension mismatch.
  Vector operator()(double t, double s, const Vector& x) const;

 private:
  Evaluator evaluator_;
  SystemMeta meta_;
};

/// Named alias for EvolutionSystem::operator().
Vector evolve(const EvolutionSystem& sys, double t, double s, const Vector& x);

/// Positive step sizes lambda_n for resolvent products.
class StepSequence {
 public:
  enum class Kind { kPower, kConstant, kList };

  static StepSequence power(double c, double alpha);  // lambda_n = c*(n+1)^(-alpha)
  static StepSequence constant(double c);
  static StepSequence list(std::vector<double> values);

  Kind kind() const { return kind_; }
  double coefficient() const { return c_; }
  double exponent() const { return alpha_; }
  const std::vector<double>& values() const { return values_; }

  /// lambda_n for n >= 0; 0 signals an exhausted explicit list.
  double lambda(std::size_t n) const;

  bool in_l1() const;  // sum lambda_n finite under the declared closed form
  bool in_l2() const;  // sum lambda_n^2 finite

 private:
  StepSequence() = default;
  Kind kind_ = Kind::kConstant;
  double c_ = 1.0;
  double alpha_ = 0.0;
  std::vector<double> values_;
};

/// Partial sums sigma_n = sum_{k<=n} lambda_k and the counting function
/// nu(t) = max{n : sigma_n <= t} (-1 when sigma_0 > t). The sigma table is
/// extended lazily under a lock; extension stops at max_terms, at an
/// exhausted list, or when sigma stops increasing in floating point (an l1
/// step sequence), after which nu saturates and the product freezes.
class ProductSchedule {
 public:
  ProductSchedule(StepSequence steps, std::size_t max_terms);

  double sigma(std::size_t n) const;
  long nu(double t) const;
  const StepSequence& steps() const { return steps_; }
  std::size_t materialized_terms() const;

 private:
  void extend_past(double t) const;  // caller holds the lock

  StepSequence steps_;
  std::size_t max_terms_;
  mutable std::mutex mutex_;
  mutable std::vector<double> sigma_;
  mutable bool saturated_ = false;
};

struct ProductSystemSpec {
  StepSequence steps;
  OperatorSpec op;
  std::size_t max_terms = 4000000;
};

/// U(t,s) = composition of resolvents (I + lambda_n op)^{-1} for
/// n = nu(s)+1 .. nu(t), applied in increasing n; piecewise constant in t
/// between the sigma_n.
EvolutionSystem make_product_system(ProductSystemSpec spec);

/// Implicit-Euler flow of -u' in op(u) + forcing on the absolute anchor
/// grid {k*h_int}: one resolvent step with parameter h_int per anchor in
/// (s, t], forcing sampled at the left endpoint of each step. The state is
/// piecewise constant between anchors, which makes the composition law
/// hold bitwise.
EvolutionSystem make_flow_system(OperatorSpec op, Forcing forcing, double h_int);

/// make_flow_system with zero forcing, named for the resolvent-product
/// reading (I + h op)^{-n} of the same construction.
EvolutionSystem make_exponential_system(OperatorSpec op, double h_int);

enum class ClosedFormFormula {
  kShiftExp,     // d=1: U(t,s)x = x + e^{-s} - e^{-t}
  kLinearDecay,  // U(t,s)x = e^{-mu (t-s)} x
  kRotation,     // d=2: rotation by omega * (t-s)
};

/// Exact evaluators; `param` is mu for linear decay and omega for rotation
/// (unused for shift-exp). `dim` must be 1 for shift-exp, 2 for rotation.
EvolutionSystem make_closed_form_system(ClosedFormFormula formula, double param,
                                        Eigen::Index dim);

EvolutionSystem make_shift_exp_system();
EvolutionSystem make_linear_decay_system(double mu, Eigen::Index dim);
EvolutionSystem make_rotation_system(double omega);

/// Orbit u(t_i) = U(t_i, t0) x0 computed incrementally through the
/// evolution law; grid times must all be >= t0.
SampledCurve orbit(const EvolutionSystem& sys, double t0, const Vector& x0,
                   const TimeGrid& grid, Interpolation interp);

/// Max over sampled (t, s, x, y) with t_min <= s <= t <= t_max of
/// ||U(t,s)x - U(t,s)y|| / ||x - y||; a lower bound for the true Lipschitz
/// constant.
double lipschitz_estimate(const EvolutionSystem& sys, int pairs, double t_min,
                          double t_max, std::uint64_t seed);

struct SCESSample {
  double t = 0.0;
  double s = 0.0;
  double m_hat = 0.0;  // empirical contraction factor
  int pairs = 0;
};

struct SCESProfile {
  std::vector<SCESSample> samples;
  double threshold = 1e-3;
  /// For each s, the factor at the largest profiled t fell below threshold.
  bool sces_plausible = false;
};

/// Empirical contraction factors M^(t,s) = max ratio over sampled pairs,
/// for every s in s_list and t in t_list with t >= s.
SCESProfile sces_profile(const EvolutionSystem& sys,
                         const std::vector<double>& t_list,
                         const std::vector<double>& s_list, int pairs,
                         std::uint64_t seed, double threshold = 1e-3);

}  // namespace evoasym
