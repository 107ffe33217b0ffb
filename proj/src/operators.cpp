#include "evoasym/operators.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace evoasym {

namespace {

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw InvalidInputError(std::string(what) + ": matrix must be square, d >= 1");
  }
  if (!m.allFinite()) {
    throw InvalidInputError(std::string(what) + ": non-finite entry");
  }
}

void require_dimension(const OperatorSpec& op, const Vector& x, const char* what) {
  if (x.size() != op.dimension()) {
    throw DimensionMismatchError(std::string(what) + ": operator/vector dimension mismatch");
  }
}

double min_symmetric_eigenvalue(const Matrix& a) {
  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  return es.eigenvalues().minCoeff();
}

// Solves (I + lambda*M) y = rhs and verifies the solve; catches singular
// systems built from unchecked operators.
Vector solve_shifted(const Matrix& m, double lambda, const Vector& rhs) {
  const Matrix sys = Matrix::Identity(m.rows(), m.cols()) + lambda * m;
  Eigen::PartialPivLU<Matrix> lu(sys);
  Vector y = lu.solve(rhs);
  const double residual = (sys * y - rhs).norm();
  if (!y.allFinite() || residual > 1e-8 * (1.0 + rhs.norm())) {
    throw NoConvergenceError("resolvent: linear solve failed (singular I + lambda*A?)",
                             residual);
  }
  return y;
}

Vector soft_threshold(const Vector& x, double tau) {
  Vector y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double mag = std::abs(x[i]) - tau;
    y[i] = mag > 0.0 ? (x[i] > 0.0 ? mag : -mag) : 0.0;
  }
  return y;
}

Vector clamp_to_box(const Vector& x, const Vector& lo, const Vector& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

// Affine part M y + c accumulated from linear/quadratic/skew terms.
struct AffinePart {
  Matrix m;
  Vector c;
};

void collect_terms(const OperatorSpec& op, AffinePart& affine,
                   std::vector<const OperatorSpec*>& nonsmooth) {
  switch (op.kind()) {
    case OperatorKind::kLinear:
    case OperatorKind::kSkew:
      affine.m += op.matrix();
      break;
    case OperatorKind::kQuadratic:
      affine.m += op.matrix();
      affine.c += op.shift();
      break;
    case OperatorKind::kL1:
    case OperatorKind::kBox:
      nonsmooth.push_back(&op);
      break;
    case OperatorKind::kSum:
      for (const OperatorSpec& term : op.terms()) {
        collect_terms(term, affine, nonsmooth);
      }
      break;
  }
}

// Resolvent of a pure nonsmooth primitive (both are coordinatewise exact).
Vector prox_primitive(const OperatorSpec& op, double gamma, const Vector& z) {
  if (op.kind() == OperatorKind::kL1) return soft_threshold(z, gamma * op.weight());
  return clamp_to_box(z, op.lower(), op.upper());
}

double operator_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.transpose() * m);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

// Solves 0 in (y - x)/lambda + M y + c + N(y) by forward-backward steps
// y <- prox_{gamma N}(y - gamma * B y), B y = y/lambda + M y + c - x/lambda.
// B is strongly monotone with modulus 1/lambda when M is monotone, so the
// iteration contracts with factor sqrt(1 - (m/L)^2).
Vector resolvent_forward_backward(const AffinePart& affine,
                                  const OperatorSpec& nonsmooth, double lambda,
                                  const Vector& x) {
  constexpr int kMaxIterations = 10000;
  constexpr double kTolerance = 1e-12;

  const double modulus = 1.0 / lambda;
  const double lipschitz = modulus + operator_norm(affine.m);
  const double gamma = modulus / (lipschitz * lipschitz);
  const Vector drift = affine.c - x / lambda;

  const double target = kTolerance * (1.0 + x.norm());
  Vector y = prox_primitive(nonsmooth, lambda, x);
  double residual = std::numeric_limits<double>::infinity();
  double previous_step = std::numeric_limits<double>::infinity();
  for (int k = 0; k < kMaxIterations; ++k) {
    const Vector forward = y - gamma * (y / lambda + affine.m * y + drift);
    Vector next = prox_primitive(nonsmooth, gamma, forward);
    const double step = (next - y).norm();
    y = std::move(next);
    residual = step / gamma;
    if (residual <= target) return y;
    // fixed point reached at floating-point resolution
    if (step == 0.0 || (step >= previous_step && step <= 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + y.norm()))) {
      return y;
    }
    previous_step = step;
  }
  throw NoConvergenceError("resolvent: forward-backward iteration cap reached", residual);
}

}  // namespace

OperatorSpec OperatorSpec::linear(Matrix a) {
  require_square(a, "OperatorSpec::linear");
  const double min_eig = min_symmetric_eigenvalue(a);
  if (min_eig < -1e-10) {
    throw InvalidInputError(
        "OperatorSpec::linear: symmetric part not positive semidefinite "
        "(min eigenvalue " + format_full(min_eig) + ")");
  }
  OperatorSpec op;
  op.kind_ = OperatorKind::kLinear;
  op.dim_ = a.rows();
  op.matrix_ = std::move(a);
  return op;
}

OperatorSpec OperatorSpec::linear_unchecked(Matrix a) {
  require_square(a, "OperatorSpec::linear_unchecked");
  OperatorSpec op;
  op.kind_ = OperatorKind::kLinear;
  op.dim_ = a.rows();
  op.monotone_certified_ = min_symmetric_eigenvalue(a) >= -1e-10;
  op.matrix_ = std::move(a);
  return op;
}

OperatorSpec OperatorSpec::quadratic(Matrix q, Vector b) {
  require_square(q, "OperatorSpec::quadratic");
  if (b.size() != q.rows()) {
    throw DimensionMismatchError("OperatorSpec::quadratic: shift dimension mismatch");
  }
  require_finite(b, "OperatorSpec::quadratic");
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > 0.0) {
    throw InvalidInputError("OperatorSpec::quadratic: Q must be symmetric as stored");
  }
  if (min_symmetric_eigenvalue(q) < -1e-10) {
    throw InvalidInputError("OperatorSpec::quadratic: Q not positive semidefinite");
  }
  OperatorSpec op;
  op.kind_ = OperatorKind::kQuadratic;
  op.dim_ = q.rows();
  op.matrix_ = std::move(q);
  op.shift_ = std::move(b);
  return op;
}

OperatorSpec OperatorSpec::l1(double weight, Eigen::Index dim) {
  if (!(weight > 0.0) || dim < 1) {
    throw InvalidInputError("OperatorSpec::l1: need weight > 0 and dim >= 1");
  }
  OperatorSpec op;
  op.kind_ = OperatorKind::kL1;
  op.dim_ = dim;
  op.weight_ = weight;
  return op;
}

OperatorSpec OperatorSpec::box(Vector lo, Vector hi) {
  if (lo.size() != hi.size() || lo.size() < 1) {
    throw DimensionMismatchError("OperatorSpec::box: bound dimension mismatch");
  }
  require_finite(lo, "OperatorSpec::box");
  require_finite(hi, "OperatorSpec::box");
  if (((hi - lo).array() < 0.0).any()) {
    throw InvalidInputError("OperatorSpec::box: need lo <= hi per coordinate");
  }
  OperatorSpec op;
  op.kind_ = OperatorKind::kBox;
  op.dim_ = lo.size();
  op.lower_ = std::move(lo);
  op.upper_ = std::move(hi);
  return op;
}

OperatorSpec OperatorSpec::skew(Matrix r) {
  require_square(r, "OperatorSpec::skew");
  if ((r + r.transpose()).cwiseAbs().maxCoeff() > 0.0) {
    throw InvalidInputError("OperatorSpec::skew: R' must equal -R exactly as stored");
  }
  OperatorSpec op;
  op.kind_ = OperatorKind::kSkew;
  op.dim_ = r.rows();
  op.matrix_ = std::move(r);
  return op;
}

OperatorSpec OperatorSpec::sum(std::vector<OperatorSpec> terms) {
  if (terms.empty()) throw InvalidInputError("OperatorSpec::sum: empty term list");
  const Eigen::Index d = terms.front().dimension();
  bool certified = true;
  for (const OperatorSpec& t : terms) {
    if (t.dimension() != d) {
      throw DimensionMismatchError("OperatorSpec::sum: summands must share dimension");
    }
    certified = certified && t.monotone_certified();
  }
  OperatorSpec op;
  op.kind_ = OperatorKind::kSum;
  op.dim_ = d;
  op.monotone_certified_ = certified;
  op.terms_ = std::make_shared<const std::vector<OperatorSpec>>(std::move(terms));
  return op;
}

const std::vector<OperatorSpec>& OperatorSpec::terms() const {
  if (kind_ != OperatorKind::kSum || !terms_) {
    throw InvalidInputError("OperatorSpec::terms: not a sum");
  }
  return *terms_;
}

Vector apply(const OperatorSpec& op, const Vector& x) {
  require_dimension(op, x, "apply");
  require_finite(x, "apply");
  switch (op.kind()) {
    case OperatorKind::kLinear:
    case OperatorKind::kSkew:
      return op.matrix() * x;
    case OperatorKind::kQuadratic:
      return op.matrix() * x + op.shift();
    case OperatorKind::kL1: {
      Vector y(x.size());
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x[i] == 0.0) {
          throw MultivaluedAtPointError(
              "apply: l1 subgradient is an interval at a zero coordinate");
        }
        y[i] = x[i] > 0.0 ? op.weight() : -op.weight();
      }
      return y;
    }
    case OperatorKind::kBox: {
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x[i] < op.lower()[i] || x[i] > op.upper()[i]) {
          throw InvalidInputError("apply: point outside the box domain");
        }
        if (x[i] == op.lower()[i] || x[i] == op.upper()[i]) {
          throw MultivaluedAtPointError(
              "apply: box normal cone is multivalued on the boundary");
        }
      }
      return Vector::Zero(x.size());
    }
    case OperatorKind::kSum: {
      Vector y = Vector::Zero(x.size());
      for (const OperatorSpec& term : op.terms()) y += apply(term, x);
      return y;
    }
  }
  throw InvalidInputError("apply: unknown operator kind");
}

Vector resolvent(const OperatorSpec& op, double lambda, const Vector& x) {
  if (!(lambda > 0.0)) throw InvalidInputError("resolvent: lambda must be > 0");
  require_dimension(op, x, "resolvent");
  require_finite(x, "resolvent");
  switch (op.kind()) {
    case OperatorKind::kLinear:
    case OperatorKind::kSkew:
      return solve_shifted(op.matrix(), lambda, x);
    case OperatorKind::kQuadratic:
      return solve_shifted(op.matrix(), lambda, x - lambda * op.shift());
    case OperatorKind::kL1:
      return soft_threshold(x, lambda * op.weight());
    case OperatorKind::kBox:
      return clamp_to_box(x, op.lower(), op.upper());
    case OperatorKind::kSum: {
      AffinePart affine{Matrix::Zero(op.dimension(), op.dimension()),
                        Vector::Zero(op.dimension())};
      std::vector<const OperatorSpec*> nonsmooth;
      collect_terms(op, affine, nonsmooth);
      if (nonsmooth.empty()) {
        return solve_shifted(affine.m, lambda, x - lambda * affine.c);
      }
      if (nonsmooth.size() == 1) {
        return resolvent_forward_backward(affine, *nonsmooth.front(), lambda, x);
      }
      throw InvalidInputError(
          "resolvent: sums with more than one nonsmooth term are not supported");
    }
  }
  throw InvalidInputError("resolvent: unknown operator kind");
}

bool is_affine(const OperatorSpec& op) {
  switch (op.kind()) {
    case OperatorKind::kLinear:
    case OperatorKind::kQuadratic:
    case OperatorKind::kSkew:
      return true;
    case OperatorKind::kL1:
    case OperatorKind::kBox:
      return false;
    case OperatorKind::kSum:
      for (const OperatorSpec& term : op.terms()) {
        if (!is_affine(term)) return false;
      }
      return true;
  }
  return false;
}

void affine_decomposition(const OperatorSpec& op, Matrix& m, Vector& c) {
  if (!is_affine(op)) {
    throw InvalidInputError("affine_decomposition: operator has a nonsmooth term");
  }
  AffinePart affine{Matrix::Zero(op.dimension(), op.dimension()),
                    Vector::Zero(op.dimension())};
  std::vector<const OperatorSpec*> nonsmooth;
  collect_terms(op, affine, nonsmooth);
  m = std::move(affine.m);
  c = std::move(affine.c);
}

namespace {

// Sampling domain for probe points: interior of the box intersection when
// box terms are present (their exterior has no operator value), gaussian
// otherwise.
struct SampleDomain {
  bool boxed = false;
  Vector lo;
  Vector hi;
};

void collect_boxes(const OperatorSpec& op, SampleDomain& domain) {
  if (op.kind() == OperatorKind::kBox) {
    if (!domain.boxed) {
      domain.boxed = true;
      domain.lo = op.lower();
      domain.hi = op.upper();
    } else {
      domain.lo = domain.lo.cwiseMax(op.lower());
      domain.hi = domain.hi.cwiseMin(op.upper());
    }
  } else if (op.kind() == OperatorKind::kSum) {
    for (const OperatorSpec& term : op.terms()) collect_boxes(term, domain);
  }
}

Vector sample_point(const SampleDomain& domain, Eigen::Index dim, Rng& rng) {
  if (!domain.boxed) return rng.gaussian_vector(dim);
  Vector x(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    x[i] = rng.uniform(domain.lo[i], domain.hi[i]);
  }
  return x;
}

}  // namespace

double monotonicity_probe(const OperatorSpec& op, int samples,
                          std::uint64_t seed) {
  if (samples < 1) throw InvalidInputError("monotonicity_probe: samples >= 1");
  SampleDomain domain;
  collect_boxes(op, domain);
  if (domain.boxed && ((domain.hi - domain.lo).array() <= 0.0).any()) {
    throw InvalidInputError("monotonicity_probe: box intersection has empty interior");
  }

  Rng rng(seed);
  double worst = std::numeric_limits<double>::infinity();
  int accepted = 0;
  long attempts = 0;
  const long max_attempts = 1000L * samples + 1000L;
  while (accepted < samples && attempts < max_attempts) {
    ++attempts;
    const Vector x = sample_point(domain, op.dimension(), rng);
    const Vector y = sample_point(domain, op.dimension(), rng);
    if ((x - y).squaredNorm() < 1e-24) continue;
    try {
      const Vector dx = apply(op, x) - apply(op, y);
      const Vector d = x - y;
      worst = std::min(worst, dx.dot(d) / d.squaredNorm());
      ++accepted;
    } catch (const MultivaluedAtPointError&) {
      continue;  // resample
    } catch (const InvalidInputError&) {
      continue;  // outside a box domain; resample
    }
  }
  if (accepted == 0) {
    throw InsufficientDataError("monotonicity_probe: no single-valued sample pairs found");
  }
  return worst;
}

Forcing Forcing::zero() {
  Forcing f;
  f.kind_ = Kind::kZero;
  f.l1_integrable_ = true;
  return f;
}

Forcing Forcing::power_decay(double c, double p, Vector direction) {
  if (!(c >= 0.0) || !(p > 0.0)) {
    throw InvalidInputError("Forcing::power_decay: need c >= 0 and p > 0");
  }
  require_finite(direction, "Forcing::power_decay");
  const double len = direction.norm();
  if (!(len > 0.0)) {
    throw InvalidInputError("Forcing::power_decay: direction must be nonzero");
  }
  Forcing f;
  f.kind_ = Kind::kPowerDecay;
  f.c_ = c;
  f.p_ = p;
  f.direction_ = direction / len;
  f.l1_integrable_ = p > 1.0;
  return f;
}

Forcing Forcing::custom(SampledCurve curve, bool l1_integrable) {
  Forcing f;
  f.kind_ = Kind::kCustom;
  f.curve_ = std::move(curve);
  f.l1_integrable_ = l1_integrable;
  return f;
}

Vector Forcing::value_at(double t, Eigen::Index dim) const {
  switch (kind_) {
    case Kind::kZero:
      return Vector::Zero(dim);
    case Kind::kPowerDecay: {
      if (direction_.size() != dim) {
        throw DimensionMismatchError("Forcing: direction dimension mismatch");
      }
      return (c_ * std::pow(1.0 + t, -p_)) * direction_;
    }
    case Kind::kCustom: {
      Vector v = curve_->value_at(t);
      if (v.size() != dim) {
        throw DimensionMismatchError("Forcing: curve dimension mismatch");
      }
      return v;
    }
  }
  throw InvalidInputError("Forcing: unknown kind");
}

}  // namespace evoasym
