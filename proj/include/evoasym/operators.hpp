#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "evoasym/core.hpp"

namespace evoasym {

enum class OperatorKind {
  kLinear,     // x -> A x, symmetric part of A positive semidefinite
  kQuadratic,  // gradient of (1/2) x'Qx + b'x, Q symmetric PSD
  kL1,         // subdifferential of w * ||x||_1, w > 0
  kBox,        // subdifferential of the indicator of a coordinate box
  kSkew,       // x -> R x with R' = -R exactly as stored
  kSum,        // pointwise sum of the terms
};

/// Immutable description of a (possibly multivalued) monotone operator on
/// R^d. Multivalued kinds are used operationally through their resolvents;
/// `apply` is partial and throws where the value set is not a singleton.
class OperatorSpec {
 public:
  /// Rejects matrices whose symmetric part has an eigenvalue below -1e-10.
  static OperatorSpec linear(Matrix a);
  /// Same map but skipping the monotonicity check, for deliberately
  /// non-monotone experiments.
  static OperatorSpec linear_unchecked(Matrix a);
  static OperatorSpec quadratic(Matrix q, Vector b);
  static OperatorSpec l1(double weight, Eigen::Index dim);
  static OperatorSpec box(Vector lo, Vector hi);
  static OperatorSpec skew(Matrix r);
  static OperatorSpec sum(std::vector<OperatorSpec> terms);

  OperatorKind kind() const { return kind_; }
  Eigen::Index dimension() const { return dim_; }
  bool monotone_certified() const { return monotone_certified_; }

  const Matrix& matrix() const { return matrix_; }       // linear/quadratic/skew
  const Vector& shift() const { return shift_; }         // quadratic
  double weight() const { return weight_; }              // l1
  const Vector& lower() const { return lower_; }         // box
  const Vector& upper() const { return upper_; }         // box
  const std::vector<OperatorSpec>& terms() const;        // sum

 private:
  OperatorSpec() = default;

  OperatorKind kind_ = OperatorKind::kLinear;
  Eigen::Index dim_ = 0;
  bool monotone_certified_ = true;
  Matrix matrix_;
  Vector shift_;
  double weight_ = 0.0;
  Vector lower_;
  Vector upper_;
  std::shared_ptr<const std::vector<OperatorSpec>> terms_;
};

/// Single-valued evaluation. Throws MultivaluedAtPointError where the
/// operator is set-valued (l1 at a zero coordinate, box at its boundary)
/// and InvalidInputError outside the box domain.
Vector apply(const OperatorSpec& op, const Vector& x);

/// The unique y with y + lambda * op(y) containing x, lambda > 0.
/// Closed form for all primitive kinds; sums combine their affine terms
/// exactly and handle at most one nonsmooth term by a damped
/// forward-backward fixed-point iteration (residual 1e-12, cap 1e4).
Vector resolvent(const OperatorSpec& op, double lambda, const Vector& x);

/// Minimum over sampled pairs (x, y) of <op(x)-op(y), x-y> / ||x-y||^2.
/// Values >= -1e-9 certify monotonicity on the sample. Multivalued points
/// are resampled.
double monotonicity_probe(const OperatorSpec& op, int samples,
                          std::uint64_t seed);

/// True when op is everywhere single-valued affine, i.e. built from
/// linear/quadratic/skew terms only.
bool is_affine(const OperatorSpec& op);

/// The (M, c) with op(y) = M y + c; throws InvalidInputError when the
/// operator has a nonsmooth term.
void affine_decomposition(const OperatorSpec& op, Matrix& m, Vector& c);

/// Forcing term f(t) for perturbed flows -u' in Au + f.
class Forcing {
 public:
  enum class Kind { kZero, kPowerDecay, kCustom };

  static Forcing zero();
  /// c * (1+t)^(-p) along a unit direction e; c >= 0, p > 0, ||e|| = 1
  /// (the direction is normalized on construction).
  static Forcing power_decay(double c, double p, Vector direction);
  /// Arbitrary sampled curve; integrability cannot be derived and must be
  /// asserted by the caller.
  static Forcing custom(SampledCurve curve, bool l1_integrable);

  Kind kind() const { return kind_; }
  bool l1_integrable() const { return l1_integrable_; }
  double coefficient() const { return c_; }
  double decay_power() const { return p_; }
  const Vector& direction() const { return direction_; }
  const std::optional<SampledCurve>& curve() const { return curve_; }

  /// f(t); the zero kind needs the ambient dimension to produce a vector.
  Vector value_at(double t, Eigen::Index dim) const;

 private:
  Forcing() = default;
  Kind kind_ = Kind::kZero;
  bool l1_integrable_ = true;
  double c_ = 0.0;
  double p_ = 1.0;
  Vector direction_;
  std::optional<SampledCurve> curve_;
};

}  // namespace evoasym
