#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "evoasym/asymptotics.hpp"

using namespace evoasym;

namespace {

Vector vec1(double a) {
  Vector v(1);
  v << a;
  return v;
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

SampledCurve constant_curve(const Vector& x, double stop, double step) {
  TimeGrid grid = TimeGrid::uniform(0.0, stop, step);
  std::vector<Vector> values(grid.size(), x);
  return SampledCurve(grid, std::move(values), Interpolation::kPiecewiseLinear);
}

DefectProfile profile_from(std::vector<double> t, std::vector<double> values) {
  DefectProfile p;
  p.t = std::move(t);
  p.values = std::move(values);
  p.horizon = 1.0;
  p.h_resolution = 0.5;
  return p;
}

}  // namespace

TEST_CASE("defect offsets include zero and the horizon") {
  const auto offsets = defect_offsets(20.0, 0.1);
  CHECK(offsets.front() == 0.0);
  CHECK(offsets.back() == 20.0);
  for (std::size_t i = 1; i < offsets.size(); ++i) {
    CHECK(offsets[i] > offsets[i - 1]);
  }
}

TEST_CASE("exact orbits have zero defect under their own system") {
  const std::vector<double> t_grid{0.0, 2.0, 4.0, 6.0, 8.0, 10.0};
  SUBCASE("rotation") {
    const EvolutionSystem sys = make_rotation_system(1.0);
    const SampledCurve u = orbit(sys, 0.0, vec2(1.0, 0.0),
                                 TimeGrid::uniform(0.0, 16.0, 0.5),
                                 Interpolation::kPiecewiseLinear);
    const DefectProfile p = defect_profile(u, sys, t_grid, 5.0, 0.5);
    for (double psi : p.values) CHECK(psi <= 1e-12);
  }
  SUBCASE("shift-exp") {
    const EvolutionSystem sys = make_shift_exp_system();
    const SampledCurve u = orbit(sys, 0.0, vec1(0.3),
                                 TimeGrid::uniform(0.0, 16.0, 0.5),
                                 Interpolation::kPiecewiseLinear);
    const DefectProfile p = defect_profile(u, sys, t_grid, 5.0, 0.5);
    for (double psi : p.values) CHECK(psi <= 1e-12);
  }
  SUBCASE("anchored flow, sampled on anchor multiples") {
    const EvolutionSystem sys = make_flow_system(
        OperatorSpec::linear(Matrix::Identity(2, 2)), Forcing::zero(), 0.01);
    const SampledCurve u = orbit(sys, 0.0, vec2(1.0, -2.0),
                                 TimeGrid::uniform(0.0, 16.0, 0.5),
                                 Interpolation::kPiecewiseConstantLeft);
    const DefectProfile p = defect_profile(u, sys, t_grid, 5.0, 0.5);
    for (double psi : p.values) CHECK(psi == 0.0);  // bitwise evolution law
  }
}

TEST_CASE("constant curve defect under shift-exp matches the closed form") {
  const EvolutionSystem sys = make_shift_exp_system();
  const double horizon = 50.0;
  const SampledCurve u = constant_curve(vec1(3.0), 60.0, 5.0);
  const std::vector<double> t_grid{0.0, 1.0, 5.0};
  const DefectProfile p = defect_profile(u, sys, t_grid, horizon, 0.5);
  for (std::size_t i = 0; i < p.t.size(); ++i) {
    const double expected = std::exp(-p.t[i]) * (1.0 - std::exp(-horizon));
    CHECK(std::abs(p.values[i] - expected) < 1e-10);
  }
}

TEST_CASE("defect never decreases when the horizon grows or the grid refines") {
  const EvolutionSystem sys = make_linear_decay_system(1.0, 2);
  SampledCurve u = orbit(sys, 0.0, vec2(1.0, 1.0),
                         TimeGrid::uniform(0.0, 40.0, 0.25),
                         Interpolation::kPiecewiseLinear);
  u = perturb_to_almost_orbit(u, Forcing::power_decay(1.0, 1.0, vec2(0.0, 1.0)));
  const std::vector<double> t_grid{0.0, 4.0, 8.0, 12.0};
  const DefectProfile base = defect_profile(u, sys, t_grid, 8.0, 1.0);
  const DefectProfile longer = defect_profile(u, sys, t_grid, 16.0, 1.0);
  const DefectProfile finer = defect_profile(u, sys, t_grid, 8.0, 0.5);
  for (std::size_t i = 0; i < base.values.size(); ++i) {
    CHECK(longer.values[i] >= base.values[i]);
    CHECK(finer.values[i] >= base.values[i]);
  }
}

TEST_CASE("is_almost_orbit verdicts") {
  CHECK(is_almost_orbit(profile_from({0, 1, 2, 3, 4}, {0, 0, 0, 0, 0}), 1e-6, 1.0)
            .almost_orbit);
  // psi(t) = e^{-t}: comfortably under 1e-3 past t = 10
  std::vector<double> t, v;
  for (double x = 0.0; x <= 20.0; x += 1.0) {
    t.push_back(x);
    v.push_back(std::exp(-x));
  }
  CHECK(is_almost_orbit(profile_from(t, v), 1e-3, 10.0).almost_orbit);
  CHECK_FALSE(is_almost_orbit(profile_from({0, 1, 2, 3, 4}, {.5, .5, .5, .5, .5}),
                              1e-3, 0.0)
                  .almost_orbit);
  // oscillating tails fail the 10%-slack monotone trend
  CHECK_FALSE(
      is_almost_orbit(profile_from({0, 1, 2, 3, 4}, {1e-4, 1e-6, 1e-4, 1e-6, 1e-4}),
                      1e-3, 0.0)
          .almost_orbit);
  CHECK_THROWS_AS(is_almost_orbit(profile_from({0, 1}, {0, 0}), 1e-3, 0.0),
                  InsufficientDataError);
}

TEST_CASE("a system is asymptotically almost-equivalent to itself") {
  const EvolutionSystem sys = make_linear_decay_system(1.0, 1);
  const AAEReport report =
      aae_check(sys, sys, {{0.0, vec1(1.0)}, {0.0, vec1(-2.0)}},
                {5.0, 10.0, 15.0, 20.0}, 5.0, 0.25, 1e-6, 5.0);
  CHECK(report.verdict == AAEVerdict::kSupported);
  for (double psi : report.forward.values) CHECK(psi <= 1e-12);
  for (double psi : report.backward.values) CHECK(psi <= 1e-12);
}

TEST_CASE("decay and rotation are not almost-equivalent") {
  const EvolutionSystem decay = make_linear_decay_system(1.0, 2);
  const EvolutionSystem rot = make_rotation_system(1.0);
  const AAEReport report = aae_check(decay, rot, {{0.0, vec2(1.0, 0.0)}},
                                     {10.0, 12.0, 14.0, 16.0, 18.0, 20.0}, 8.0,
                                     0.1, 1e-6, 10.0);
  CHECK(report.verdict == AAEVerdict::kUnsupported);
  // the rotating orbit stays a unit away from any decaying transport
  const auto fwd_max =
      *std::max_element(report.forward.values.begin(), report.forward.values.end());
  CHECK(fwd_max >= 0.5);
}

TEST_CASE("perturbations and the almost-orbit property") {
  const EvolutionSystem sys = make_linear_decay_system(1.0, 2);
  const SampledCurve u = orbit(sys, 0.0, vec2(1.0, 0.0),
                               TimeGrid::uniform(0.0, 130.0, 0.25),
                               Interpolation::kPiecewiseLinear);
  SUBCASE("zero perturbation leaves the curve unchanged") {
    const SampledCurve v = perturb_to_almost_orbit(u, Forcing::zero());
    for (std::size_t i = 0; i < u.values().size(); ++i) {
      CHECK((v.values()[i] - u.values()[i]).norm() == 0.0);
    }
  }
  SUBCASE("a slowly vanishing perturbation keeps the property") {
    const SampledCurve v = perturb_to_almost_orbit(
        u, Forcing::power_decay(1.0, 1.0, vec2(0.0, 1.0)));
    const DefectProfile p =
        defect_profile(v, sys, {90.0, 95.0, 100.0, 105.0, 110.0}, 20.0, 0.25);
    CHECK(is_almost_orbit(p, 0.02, 90.0).almost_orbit);
  }
  SUBCASE("a constant perturbation destroys the property") {
    TimeGrid grid = TimeGrid::uniform(0.0, 130.0, 0.25);
    std::vector<Vector> values(grid.size(), vec2(0.3, 0.0));
    const SampledCurve pert(grid, values, Interpolation::kPiecewiseLinear);
    const SampledCurve v =
        perturb_to_almost_orbit(u, Forcing::custom(pert, false));
    const DefectProfile p =
        defect_profile(v, sys, {90.0, 95.0, 100.0, 105.0, 110.0}, 20.0, 0.25);
    CHECK_FALSE(is_almost_orbit(p, 0.1, 90.0).almost_orbit);
  }
}

TEST_CASE("asp classification") {
  const std::vector<double> t_grid{0.0, 1.0, 5.0};
  SUBCASE("every point of shift-exp is almost-stationary, none stationary") {
    const EvolutionSystem sys = make_shift_exp_system();
    const auto reports = asp_scan(sys, {vec1(-1.0), vec1(0.0), vec1(3.0)}, t_grid,
                                  50.0, 0.5, 1e-2);
    for (const auto& r : reports) {
      CHECK(r.classification == PointClass::kAlmostStationary);
    }
    // direct non-stationarity witness: U(1,0)x != x
    CHECK(std::abs(sys(1.0, 0.0, vec1(0.0))[0]) > 0.1);
  }
  SUBCASE("the minimizer of a quadratic flow is stationary") {
    Matrix q(2, 2);
    q << 2.0, 0.0, 0.0, 1.0;
    const Vector b = vec2(1.0, -1.0);
    const Vector x_star = q.fullPivLu().solve(-b);
    const EvolutionSystem sys =
        make_exponential_system(OperatorSpec::quadratic(q, b), 0.01);
    const auto reports = asp_scan(sys, {x_star}, t_grid, 10.0, 0.5, 1e-2);
    CHECK(reports.front().classification == PointClass::kStationary);
    // stationary points pass the almost-stationary thresholds as well
    for (const auto& [t, d] : reports.front().defect_at) CHECK(d <= 1e-2);
  }
  SUBCASE("nonzero points of linear decay are neither") {
    const EvolutionSystem sys = make_linear_decay_system(1.0, 1);
    const auto reports = asp_scan(sys, {vec1(1.0)}, t_grid, 10.0, 0.5, 1e-2);
    CHECK(reports.front().classification == PointClass::kNeither);
  }
}

TEST_CASE("asp midpoint test") {
  const EvolutionSystem sys = make_shift_exp_system();
  const std::vector<double> t_grid{0.0, 1.0, 5.0};
  CHECK(asp_midpoint_test(sys, vec1(-1.0), vec1(2.0), {0.0, 0.25, 0.5, 1.0},
                          t_grid, 50.0, 0.5, 1e-2));
  CHECK_THROWS_AS(asp_midpoint_test(make_linear_decay_system(1.0, 1), vec1(1.0),
                                    vec1(2.0), {0.5}, t_grid, 10.0, 0.5, 1e-2),
                  InvalidInputError);
  CHECK_THROWS_AS(asp_midpoint_test(sys, vec1(-1.0), vec1(2.0), {1.5}, t_grid,
                                    50.0, 0.5, 1e-2),
                  InvalidInputError);
}

TEST_CASE("strong contraction pulls almost-orbits together") {
  const EvolutionSystem sys = make_linear_decay_system(1.0, 1);
  const TimeGrid grid = TimeGrid::uniform(0.0, 40.0, 0.1);
  const SampledCurve u1 =
      orbit(sys, 0.0, vec1(1.0), grid, Interpolation::kPiecewiseLinear);
  const SampledCurve u2 =
      orbit(sys, 0.0, vec1(-1.0), grid, Interpolation::kPiecewiseLinear);
  SUBCASE("identical curves") {
    const DistanceTrace r = sces_consequence_check(sys, u1, u1, 0.0, 1e-12);
    CHECK(r.ok);
  }
  SUBCASE("two orbits: distance 2 e^{-t}") {
    const DistanceTrace r = sces_consequence_check(sys, u1, u2, 8.0, 1e-3);
    CHECK(r.ok);
    CHECK(r.trace.front().second ==
          doctest::Approx(2.0 * std::exp(-8.0)).epsilon(1e-6));
  }
  SUBCASE("orbit vs perturbed orbit") {
    const SampledCurve v =
        perturb_to_almost_orbit(u2, Forcing::power_decay(1.0, 2.0, vec1(1.0)));
    const DistanceTrace r = sces_consequence_check(sys, u1, v, 20.0, 1e-2);
    CHECK(r.ok);
  }
}

TEST_CASE("distance window surrogate for the two-sided bound") {
  SUBCASE("identical curves give sup = inf = 0") {
    const EvolutionSystem sys = make_rotation_system(1.0);
    const SampledCurve u = orbit(sys, 0.0, vec2(1.0, 0.0),
                                 TimeGrid::uniform(0.0, 20.0, 0.1),
                                 Interpolation::kPiecewiseLinear);
    const DistanceWindowCheck c = distance_window_check(u, u, 1.0, 5.0);
    CHECK(c.holds);
    CHECK(c.tail_sup == 0.0);
    CHECK(c.tail_inf == 0.0);
  }
  SUBCASE("rotation orbits keep their distance exactly") {
    const EvolutionSystem sys = make_rotation_system(1.0);
    const TimeGrid grid = TimeGrid::uniform(0.0, 120.0, 0.05);
    const SampledCurve u1 =
        orbit(sys, 0.0, vec2(1.0, 0.0), grid, Interpolation::kPiecewiseLinear);
    const SampledCurve u2 =
        orbit(sys, 0.0, vec2(0.5, 0.0), grid, Interpolation::kPiecewiseLinear);
    const DistanceWindowCheck c = distance_window_check(u1, u2, 1.0, 50.0);
    CHECK(c.holds);
    CHECK(c.tail_sup == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(c.oscillation <= 1e-9);
  }
  SUBCASE("vanishing distances on the tail") {
    const EvolutionSystem sys = make_linear_decay_system(1.0, 1);
    const TimeGrid grid = TimeGrid::uniform(0.0, 110.0, 0.1);
    const SampledCurve u1 =
        orbit(sys, 0.0, vec1(1.0), grid, Interpolation::kPiecewiseLinear);
    const SampledCurve u2 = perturb_to_almost_orbit(
        orbit(sys, 0.0, vec1(-1.0), grid, Interpolation::kPiecewiseLinear),
        Forcing::power_decay(1.0, 2.0, vec1(1.0)));
    const DistanceWindowCheck c = distance_window_check(u1, u2, 1.0, 50.0);
    CHECK(c.oscillation <= 1e-3);
  }
}

TEST_CASE("cluster points") {
  SUBCASE("a convergent curve has one cluster near its limit") {
    const EvolutionSystem sys = make_linear_decay_system(1.0, 2);
    const SampledCurve u = orbit(sys, 0.0, vec2(1.0, 1.0),
                                 TimeGrid::uniform(0.0, 30.0, 0.1),
                                 Interpolation::kPiecewiseLinear);
    const auto centers = cluster_points(u, 10.0, 0.05);
    CHECK(centers.size() == 1);
    CHECK(centers.front().norm() < 0.05);
  }
  SUBCASE("a rotation orbit covers the circle") {
    const EvolutionSystem sys = make_rotation_system(1.0);
    const SampledCurve u = orbit(sys, 0.0, vec2(1.0, 0.0),
                                 TimeGrid::uniform(0.0, 80.0, 0.05),
                                 Interpolation::kPiecewiseLinear);
    const auto centers = cluster_points(u, 20.0, 0.2);
    CHECK(centers.size() >= 10);
    for (const Vector& c : centers) CHECK(std::abs(c.norm() - 1.0) < 1e-9);
  }
  SUBCASE("a constant curve is its own single cluster") {
    const SampledCurve u = constant_curve(vec2(0.7, -0.1), 10.0, 0.5);
    const auto centers = cluster_points(u, 0.0, 0.3);
    CHECK(centers.size() == 1);
    CHECK((centers.front() - vec2(0.7, -0.1)).norm() == 0.0);
  }
  SUBCASE("needs ten tail samples") {
    const SampledCurve u = constant_curve(vec2(0.0, 0.0), 2.0, 0.5);
    CHECK_THROWS_AS(cluster_points(u, 0.0, 0.1), InsufficientDataError);
  }
}

TEST_CASE("omega limit invariance traces") {
  SUBCASE("linear decay orbits pull every gap to the origin") {
    const EvolutionSystem sys = make_linear_decay_system(1.0, 1);
    const SampledCurve u = orbit(sys, 0.0, vec1(1.0),
                                 TimeGrid::uniform(0.0, 60.0, 0.5),
                                 Interpolation::kPiecewiseLinear);
    std::vector<double> s_times;
    for (double s = 10.0; s <= 50.0; s += 5.0) s_times.push_back(s);
    const auto rows =
        omega_invariance_check(sys, u, vec1(0.0), s_times, true, 1e-3);
    REQUIRE(!rows.empty());
    for (const auto& row : rows) {
      CHECK(row.t - row.s >= 5.0);
      CHECK(row.orbit_gap == doctest::Approx(std::exp(-row.t)).epsilon(1e-9));
      CHECK(row.point_gap == 0.0);
    }
  }
  SUBCASE("rotation sampled at full periods returns to the cluster point") {
    const EvolutionSystem sys = make_rotation_system(1.0);
    const double period = 2.0 * M_PI;
    const SampledCurve u = orbit(sys, 0.0, vec2(1.0, 0.0),
                                 TimeGrid::uniform(0.0, 20.0 * period, 0.01),
                                 Interpolation::kPiecewiseLinear);
    std::vector<double> s_times;
    for (int n = 1; n <= 18; ++n) s_times.push_back(n * period);
    const auto rows =
        omega_invariance_check(sys, u, vec2(1.0, 0.0), s_times, true, 1e-2);
    for (const auto& row : rows) {
      CHECK(row.orbit_gap < 1e-2);
      CHECK(row.point_gap < 1e-2);
    }
  }
  SUBCASE("rejects a subsequence that misses the point") {
    const EvolutionSystem sys = make_rotation_system(1.0);
    const SampledCurve u = orbit(sys, 0.0, vec2(1.0, 0.0),
                                 TimeGrid::uniform(0.0, 40.0, 0.1),
                                 Interpolation::kPiecewiseLinear);
    CHECK_THROWS_AS(omega_invariance_check(sys, u, vec2(1.0, 0.0),
                                           {10.0, 11.0, 12.0, 13.0}, true, 1e-3),
                    InvalidInputError);
  }
}

TEST_CASE("modulus of continuity") {
  const std::vector<double> deltas{0.1, 0.25, 0.5, 1.0};
  SUBCASE("constant curves have zero modulus") {
    const SampledCurve u = constant_curve(vec2(1.0, 2.0), 20.0, 0.05);
    for (const auto& [d, m] : modulus_of_continuity(u, deltas, 5.0)) {
      CHECK(m == 0.0);
    }
  }
  SUBCASE("rotation modulus is the chord length") {
    const EvolutionSystem sys = make_rotation_system(1.0);
    const SampledCurve u = orbit(sys, 0.0, vec2(1.0, 0.0),
                                 TimeGrid::uniform(0.0, 40.0, 0.01),
                                 Interpolation::kPiecewiseLinear);
    for (const auto& [d, m] : modulus_of_continuity(u, deltas, 10.0)) {
      CHECK(m == doctest::Approx(2.0 * std::sin(d / 2.0)).epsilon(1e-3));
    }
  }
  SUBCASE("decay orbits are 1-lipschitz from unit start") {
    const EvolutionSystem sys = make_linear_decay_system(1.0, 1);
    const SampledCurve u = orbit(sys, 0.0, vec1(1.0),
                                 TimeGrid::uniform(0.0, 30.0, 0.01),
                                 Interpolation::kPiecewiseLinear);
    for (const auto& [d, m] : modulus_of_continuity(u, deltas, 5.0)) {
      CHECK(m <= d * 1.0 + 1e-12);
    }
  }
  SUBCASE("too coarse a grid is rejected") {
    const SampledCurve u = constant_curve(vec1(0.0), 20.0, 0.5);
    CHECK_THROWS_AS(modulus_of_continuity(u, {0.1}, 5.0), InvalidInputError);
  }
}
