#include "evoasym/systems.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace evoasym {

Vector EvolutionSystem::operator()(double t, double s, const Vector& x) const {
  if (!(s >= 0.0) || !(t >= s)) {
    throw InvalidInputError("EvolutionSystem: need t >= s >= 0");
  }
  if (x.size() != meta_.dimension) {
    throw DimensionMismatchError("EvolutionSystem: state dimension mismatch");
  }
  require_finite(x, "EvolutionSystem");
  return evaluator_(t, s, x);
}

Vector evolve(const EvolutionSystem& sys, double t, double s, const Vector& x) {
  return sys(t, s, x);
}

namespace {

// max k >= 0 with k*h <= tau; anchors are evaluated as k*h (not
// accumulated) so the index is reproducible for any tau.
long anchor_index(double tau, double h) {
  long k = static_cast<long>(std::floor(tau / h));
  if (k < 0) k = 0;
  while (static_cast<double>(k + 1) * h <= tau) ++k;
  while (k > 0 && static_cast<double>(k) * h > tau) --k;
  return k;
}

struct FlowStepper {
  FlowStepper(OperatorSpec op_in, Forcing forcing_in, double h_in)
      : op(std::move(op_in)),
        forcing(std::move(forcing_in)),
        h(h_in),
        zero_forcing(forcing.kind() == Forcing::Kind::kZero) {}

  OperatorSpec op;
  Forcing forcing;
  double h;
  bool zero_forcing;
  // prefactored I + h*M for affine operators
  bool affine = false;
  std::shared_ptr<Eigen::PartialPivLU<Matrix>> lu;
  Vector affine_shift;  // h * c

  Vector advance(long k_from, long k_to, Vector u) const {
    for (long k = k_from + 1; k <= k_to; ++k) {
      Vector rhs = std::move(u);
      if (!zero_forcing) {
        const double t_left = static_cast<double>(k - 1) * h;
        rhs -= h * forcing.value_at(t_left, rhs.size());
      }
      if (affine) {
        u = lu->solve(rhs - affine_shift);
      } else {
        u = resolvent(op, h, rhs);
      }
    }
    return u;
  }
};

}  // namespace

EvolutionSystem make_flow_system(OperatorSpec op, Forcing forcing, double h_int) {
  if (!(h_int > 0.0)) throw InvalidInputError("make_flow_system: h_int must be > 0");
  const Eigen::Index dim = op.dimension();

  auto stepper = std::make_shared<FlowStepper>(op, std::move(forcing), h_int);
  if (is_affine(op)) {
    Matrix m;
    Vector c;
    affine_decomposition(op, m, c);
    stepper->affine = true;
    stepper->lu = std::make_shared<Eigen::PartialPivLU<Matrix>>(
        Matrix::Identity(dim, dim) + h_int * m);
    stepper->affine_shift = h_int * c;
  }

  SystemMeta meta;
  meta.dimension = dim;
  meta.autonomous = stepper->zero_forcing;
  meta.piecewise_constant = true;
  meta.description = "implicit-Euler flow, h_int=" + format_full(h_int);
  if (stepper->zero_forcing && op.monotone_certified()) {
    meta.claimed_lipschitz = 1.0;
  }

  const double h = h_int;
  return EvolutionSystem(
      [stepper, h](double t, double s, const Vector& x) {
        return stepper->advance(anchor_index(s, h), anchor_index(t, h), x);
      },
      std::move(meta));
}

EvolutionSystem make_exponential_system(OperatorSpec op, double h_int) {
  return make_flow_system(std::move(op), Forcing::zero(), h_int);
}

StepSequence StepSequence::power(double c, double alpha) {
  if (!(c > 0.0) || !(alpha >= 0.0)) {
    throw InvalidInputError("StepSequence::power: need c > 0, alpha >= 0");
  }
  StepSequence s;
  s.kind_ = Kind::kPower;
  s.c_ = c;
  s.alpha_ = alpha;
  return s;
}

StepSequence StepSequence::constant(double c) {
  if (!(c > 0.0)) throw InvalidInputError("StepSequence::constant: need c > 0");
  StepSequence s;
  s.kind_ = Kind::kConstant;
  s.c_ = c;
  return s;
}

StepSequence StepSequence::list(std::vector<double> values) {
  if (values.empty()) throw InvalidInputError("StepSequence::list: empty");
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw InvalidInputError("StepSequence::list: steps must be finite and > 0");
    }
  }
  StepSequence s;
  s.kind_ = Kind::kList;
  s.values_ = std::move(values);
  return s;
}

double StepSequence::lambda(std::size_t n) const {
  switch (kind_) {
    case Kind::kPower:
      return c_ * std::pow(static_cast<double>(n + 1), -alpha_);
    case Kind::kConstant:
      return c_;
    case Kind::kList:
      return n < values_.size() ? values_[n] : 0.0;
  }
  return 0.0;
}

bool StepSequence::in_l1() const {
  switch (kind_) {
    case Kind::kPower:
      return alpha_ > 1.0;
    case Kind::kConstant:
      return false;
    case Kind::kList:
      return true;  // finite support
  }
  return false;
}

bool StepSequence::in_l2() const {
  switch (kind_) {
    case Kind::kPower:
      return alpha_ > 0.5;
    case Kind::kConstant:
      return false;
    case Kind::kList:
      return true;
  }
  return false;
}

ProductSchedule::ProductSchedule(StepSequence steps, std::size_t max_terms)
    : steps_(std::move(steps)), max_terms_(max_terms) {
  if (max_terms_ < 1) {
    throw InvalidInputError("ProductSchedule: max_terms must be >= 1");
  }
}

void ProductSchedule::extend_past(double t) const {
  while (!saturated_ && (sigma_.empty() || sigma_.back() <= t)) {
    const std::size_t n = sigma_.size();
    if (n >= max_terms_) {
      saturated_ = true;
      break;
    }
    const double lam = steps_.lambda(n);
    if (!(lam > 0.0)) {  // explicit list exhausted
      saturated_ = true;
      break;
    }
    const double next = sigma_.empty() ? lam : sigma_.back() + lam;
    if (!sigma_.empty() && next <= sigma_.back()) {
      saturated_ = true;  // sigma stopped increasing in floating point
      break;
    }
    sigma_.push_back(next);
  }
}

double ProductSchedule::sigma(std::size_t n) const {
  std::lock_guard<std::mutex> lock(mutex_);
  while (sigma_.size() <= n && !saturated_) {
    extend_past(sigma_.empty() ? 0.0 : sigma_.back());
  }
  if (n >= sigma_.size()) {
    throw InvalidInputError("ProductSchedule::sigma: index beyond materialized horizon");
  }
  return sigma_[n];
}

long ProductSchedule::nu(double t) const {
  if (!(t >= 0.0)) throw InvalidInputError("ProductSchedule::nu: t must be >= 0");
  std::lock_guard<std::mutex> lock(mutex_);
  extend_past(t);
  auto it = std::upper_bound(sigma_.begin(), sigma_.end(), t);
  return static_cast<long>(it - sigma_.begin()) - 1;
}

std::size_t ProductSchedule::materialized_terms() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return sigma_.size();
}

EvolutionSystem make_product_system(ProductSystemSpec spec) {
  auto schedule = std::make_shared<ProductSchedule>(spec.steps, spec.max_terms);
  auto op = std::make_shared<OperatorSpec>(std::move(spec.op));

  SystemMeta meta;
  meta.dimension = op->dimension();
  meta.autonomous = false;
  meta.piecewise_constant = true;
  meta.description = "resolvent product system";
  if (op->monotone_certified()) meta.claimed_lipschitz = 1.0;

  return EvolutionSystem(
      [schedule, op](double t, double s, const Vector& x) {
        const long n0 = schedule->nu(s);
        const long n1 = schedule->nu(t);
        Vector u = x;
        for (long n = n0 + 1; n <= n1; ++n) {
          u = resolvent(*op, schedule->steps().lambda(static_cast<std::size_t>(n)), u);
        }
        return u;
      },
      std::move(meta));
}

EvolutionSystem make_shift_exp_system() {
  SystemMeta meta;
  meta.dimension = 1;
  meta.autonomous = false;
  meta.claimed_lipschitz = 1.0;  // translations are isometries
  meta.description = "shift-exp: x + e^{-s} - e^{-t}";
  return EvolutionSystem(
      [](double t, double s, const Vector& x) {
        Vector y(1);
        y[0] = x[0] + (std::exp(-s) - std::exp(-t));
        return y;
      },
      std::move(meta));
}

EvolutionSystem make_linear_decay_system(double mu, Eigen::Index dim) {
  if (!(mu > 0.0)) throw InvalidInputError("make_linear_decay_system: mu must be > 0");
  if (dim < 1) throw InvalidInputError("make_linear_decay_system: dim must be >= 1");
  SystemMeta meta;
  meta.dimension = dim;
  meta.autonomous = true;
  meta.claimed_lipschitz = 1.0;
  meta.description = "linear decay e^{-mu (t-s)}, mu=" + format_full(mu);
  return EvolutionSystem(
      [mu](double t, double s, const Vector& x) -> Vector {
        return std::exp(-mu * (t - s)) * x;
      },
      std::move(meta));
}

EvolutionSystem make_rotation_system(double omega) {
  SystemMeta meta;
  meta.dimension = 2;
  meta.autonomous = true;
  meta.claimed_lipschitz = 1.0;
  meta.description = "rotation at angular rate " + format_full(omega);
  return EvolutionSystem(
      [omega](double t, double s, const Vector& x) {
        const double a = omega * (t - s);
        const double c = std::cos(a);
        const double sn = std::sin(a);
        Vector y(2);
        y[0] = c * x[0] - sn * x[1];
        y[1] = sn * x[0] + c * x[1];
        return y;
      },
      std::move(meta));
}

EvolutionSystem make_closed_form_system(ClosedFormFormula formula, double param,
                                        Eigen::Index dim) {
  switch (formula) {
    case ClosedFormFormula::kShiftExp:
      if (dim != 1) throw InvalidInputError("shift-exp system is one-dimensional");
      return make_shift_exp_system();
    case ClosedFormFormula::kLinearDecay:
      return make_linear_decay_system(param, dim);
    case ClosedFormFormula::kRotation:
      if (dim != 2) throw InvalidInputError("rotation system is two-dimensional");
      return make_rotation_system(param);
  }
  throw InvalidInputError("make_closed_form_system: unknown formula");
}

SampledCurve orbit(const EvolutionSystem& sys, double t0, const Vector& x0,
                   const TimeGrid& grid, Interpolation interp) {
  if (!(t0 >= 0.0)) throw InvalidInputError("orbit: t0 must be >= 0");
  if (grid.front() < t0) {
    throw InvalidInputError("orbit: grid starts before t0");
  }
  std::vector<Vector> values;
  values.reserve(grid.size());
  Vector u = x0;
  double current = t0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    u = sys(grid[i], current, u);
    current = grid[i];
    values.push_back(u);
  }
  return SampledCurve(grid, std::move(values), interp);
}

double lipschitz_estimate(const EvolutionSystem& sys, int pairs, double t_min,
                          double t_max, std::uint64_t seed) {
  if (pairs < 1) throw InvalidInputError("lipschitz_estimate: pairs >= 1");
  if (!(0.0 <= t_min) || !(t_min <= t_max)) {
    throw InvalidInputError("lipschitz_estimate: need 0 <= t_min <= t_max");
  }
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < pairs; ++i) {
    const double s = rng.uniform(t_min, t_max);
    const double t = s + rng.uniform(0.0, t_max - s);
    const Vector x = rng.gaussian_vector(sys.dimension());
    const Vector y = rng.gaussian_vector(sys.dimension());
    const double gap = (x - y).norm();
    if (gap < 1e-12) continue;
    const double ratio = (sys(t, s, x) - sys(t, s, y)).norm() / gap;
    worst = std::max(worst, ratio);
  }
  return worst;
}

SCESProfile sces_profile(const EvolutionSystem& sys,
                         const std::vector<double>& t_list,
                         const std::vector<double>& s_list, int pairs,
                         std::uint64_t seed, double threshold) {
  if (pairs < 1) throw InvalidInputError("sces_profile: pairs >= 1");
  SCESProfile profile;
  profile.threshold = threshold;
  Rng rng(seed);
  bool plausible = true;
  bool any = false;
  for (double s : s_list) {
    double last_t = -1.0;
    double last_m = std::numeric_limits<double>::infinity();
    for (double t : t_list) {
      if (t < s) continue;
      double m_hat = 0.0;
      for (int i = 0; i < pairs; ++i) {
        const Vector x = rng.gaussian_vector(sys.dimension());
        const Vector y = rng.gaussian_vector(sys.dimension());
        const double gap = (x - y).norm();
        if (gap < 1e-12) continue;
        m_hat = std::max(m_hat, (sys(t, s, x) - sys(t, s, y)).norm() / gap);
      }
      profile.samples.push_back({t, s, m_hat, pairs});
      if (t > last_t) {
        last_t = t;
        last_m = m_hat;
      }
      any = true;
    }
    if (last_t >= 0.0) plausible = plausible && (last_m <= threshold);
  }
  if (!any) {
    throw InvalidInputError("sces_profile: no (t, s) pair with t >= s");
  }
  profile.sces_plausible = plausible;
  return profile;
}

}  // namespace evoasym
