#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "evoasym/core.hpp"

using namespace evoasym;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Vector vec1(double a) {
  Vector v(1);
  v << a;
  return v;
}

SampledCurve ramp_curve(double stop, double step) {
  // v(t) = (t, 0), piecewise linear
  TimeGrid grid = TimeGrid::uniform(0.0, stop, step);
  std::vector<Vector> values;
  for (double t : grid.points()) values.push_back(vec2(t, 0.0));
  return SampledCurve(grid, std::move(values), Interpolation::kPiecewiseLinear);
}

}  // namespace

TEST_CASE("norm basics") {
  CHECK(norm(vec2(0.0, 0.0)) == 0.0);
  CHECK(norm(vec2(3.0, 4.0)) == doctest::Approx(5.0).epsilon(1e-15));
  Vector e(3);
  e << 1.0, 0.0, 0.0;
  CHECK(norm(e) == 1.0);
  Vector bad(2);
  bad << 1.0, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(norm(bad), InvalidInputError);
}

TEST_CASE("norm triangle inequality and homogeneity on random samples") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const Vector x = rng.gaussian_vector(4);
    const Vector y = rng.gaussian_vector(4);
    CHECK(norm(x + y) <= norm(x) + norm(y) + 1e-12);
    const double a = rng.uniform(-3.0, 3.0);
    CHECK(norm(a * x) == doctest::Approx(std::abs(a) * norm(x)).epsilon(1e-12));
  }
}

TEST_CASE("time grid validation") {
  CHECK_THROWS_AS(TimeGrid({}), InvalidInputError);
  CHECK_THROWS_AS(TimeGrid({1.0, 1.0}), InvalidInputError);
  CHECK_THROWS_AS(TimeGrid({-1.0, 2.0}), InvalidInputError);
  const TimeGrid g = TimeGrid::uniform(0.0, 1.0, 0.1);
  CHECK(g.size() == 11);
  CHECK(g.back() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("curve evaluation follows the declared interpolation") {
  TimeGrid grid({0.0, 1.0, 2.0});
  std::vector<Vector> values{vec1(0.0), vec1(2.0), vec1(6.0)};
  const SampledCurve lin(grid, values, Interpolation::kPiecewiseLinear);
  const SampledCurve hold(grid, values, Interpolation::kPiecewiseConstantLeft);
  CHECK(lin.value_at(0.5)[0] == doctest::Approx(1.0));
  CHECK(lin.value_at(1.5)[0] == doctest::Approx(4.0));
  CHECK(hold.value_at(0.5)[0] == 0.0);
  CHECK(hold.value_at(1.5)[0] == 2.0);
  CHECK(hold.value_at(2.0)[0] == 6.0);
  CHECK_THROWS_AS(lin.value_at(-0.1), InvalidInputError);
  CHECK_THROWS_AS(lin.value_at(2.1), InvalidInputError);
}

TEST_CASE("shift by zero is the identity") {
  const SampledCurve v = ramp_curve(10.0, 0.5);
  const SampledCurve w = shift_curve(v, 0.0);
  REQUIRE(w.grid().size() == v.grid().size());
  for (std::size_t i = 0; i < v.grid().size(); ++i) {
    CHECK(w.grid()[i] == v.grid()[i]);
    CHECK(w.values()[i] == v.values()[i]);
  }
}

TEST_CASE("shift of the ramp re-indexes the grid") {
  // oracle: w(t) = v(t+3) checked pointwise against the original samples
  const SampledCurve v = ramp_curve(10.0, 0.5);
  const SampledCurve w = shift_curve(v, 3.0);
  CHECK(w.span_start() == 0.0);
  CHECK(w.span_end() == doctest::Approx(7.0).epsilon(1e-12));
  for (double t = 0.0; t <= 7.0; t += 0.25) {
    CHECK(w.value_at(t)[0] == doctest::Approx(t + 3.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(shift_curve(v, -1.0), InvalidInputError);
}

TEST_CASE("constant curves are shift-invariant") {
  TimeGrid grid = TimeGrid::uniform(0.0, 5.0, 1.0);
  std::vector<Vector> values(grid.size(), vec2(1.5, -2.0));
  const SampledCurve v(grid, values, Interpolation::kPiecewiseLinear);
  const SampledCurve w = shift_curve(v, 2.5);
  for (double t : w.grid().points()) {
    CHECK((w.value_at(t) - vec2(1.5, -2.0)).norm() == 0.0);
  }
}

TEST_CASE("shift composes additively") {
  const SampledCurve v = ramp_curve(10.0, 0.5);
  const SampledCurve ab = shift_curve(shift_curve(v, 1.5), 2.0);
  const SampledCurve once = shift_curve(v, 3.5);
  for (double t = 0.0; t <= 6.5; t += 0.3) {
    CHECK(ab.value_at(t)[0] == doctest::Approx(once.value_at(t)[0]).epsilon(1e-12));
  }
}

TEST_CASE("tail stats of constants") {
  std::vector<std::pair<double, double>> samples;
  for (double t = 0.0; t <= 10.0; t += 1.0) samples.emplace_back(t, 4.25);
  const TailStats stats = tail_stats(samples, 3.0);
  CHECK(stats.inf_value == 4.25);
  CHECK(stats.sup_value == 4.25);
  CHECK(stats.oscillation == 0.0);
}

TEST_CASE("tail stats of sin on a dense grid") {
  std::vector<std::pair<double, double>> samples;
  for (double t = 0.0; t <= 100.0; t += 0.01) samples.emplace_back(t, std::sin(t));
  const TailStats stats = tail_stats(samples, 50.0);
  CHECK(stats.oscillation >= 1.99);
  CHECK(stats.oscillation <= 2.0);
}

TEST_CASE("tail stats of a decaying exponential") {
  std::vector<std::pair<double, double>> samples;
  for (double t = 0.0; t <= 20.0; t += 0.01) samples.emplace_back(t, std::exp(-t));
  const TailStats stats = tail_stats(samples, 10.0);
  CHECK(stats.sup_value == doctest::Approx(std::exp(-10.0)).epsilon(1e-2));
  CHECK(stats.inf_value <= stats.sup_value);
}

TEST_CASE("tail stats needs two samples") {
  std::vector<std::pair<double, double>> samples{{0.0, 1.0}, {1.0, 2.0}};
  CHECK_THROWS_AS(tail_stats(samples, 0.5), InsufficientDataError);
}

TEST_CASE("sub-window tail stats are contained in the enclosing window") {
  Rng rng(21);
  std::vector<std::pair<double, double>> samples;
  for (double t = 0.0; t <= 50.0; t += 0.25) samples.emplace_back(t, rng.gaussian());
  const TailStats outer = tail_stats(samples, 10.0);
  const TailStats inner = tail_stats(samples, 30.0);
  CHECK(inner.inf_value >= outer.inf_value);
  CHECK(inner.sup_value <= outer.sup_value);
}

TEST_CASE("integral of a constant curve") {
  TimeGrid grid = TimeGrid::uniform(0.0, 4.0, 0.5);
  std::vector<Vector> values(grid.size(), vec2(1.0, 2.0));
  const SampledCurve v(grid, values, Interpolation::kPiecewiseLinear);
  CHECK((integrate_curve(v, 0.0, 4.0) - vec2(4.0, 8.0)).norm() < 1e-14);
  CHECK(integrate_curve(v, 2.0, 2.0).norm() == 0.0);
}

TEST_CASE("trapezoid is exact for a linear curve") {
  const SampledCurve v = ramp_curve(2.0, 0.1);
  const Vector result = integrate_curve(v, 0.0, 2.0);
  CHECK(result[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(result[1] == 0.0);
}

TEST_CASE("integration is additive over adjacent windows") {
  Rng rng(3);
  TimeGrid grid = TimeGrid::uniform(0.0, 10.0, 0.05);
  std::vector<Vector> values;
  for (std::size_t i = 0; i < grid.size(); ++i) values.push_back(rng.gaussian_vector(3));
  for (Interpolation interp :
       {Interpolation::kPiecewiseLinear, Interpolation::kPiecewiseConstantLeft}) {
    const SampledCurve v(grid, values, interp);
    const Vector split = integrate_curve(v, 0.7, 4.3) + integrate_curve(v, 4.3, 9.1);
    const Vector whole = integrate_curve(v, 0.7, 9.1);
    CHECK((split - whole).norm() < 1e-13);
  }
}

TEST_CASE("integration rejects out-of-span windows") {
  const SampledCurve v = ramp_curve(2.0, 0.1);
  CHECK_THROWS_AS(integrate_curve(v, 0.0, 3.0), InvalidInputError);
  CHECK_THROWS_AS(integrate_curve(v, 1.0, 0.5), InvalidInputError);
}

TEST_CASE("curve csv round trip format") {
  const SampledCurve v = ramp_curve(1.0, 0.5);
  const std::string path = "test_curve_out.csv";
  write_curve_csv(v, path, "check=1");
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "# check=1");
  std::getline(in, line);
  CHECK(line == "t,x0,x1");
  std::getline(in, line);
  CHECK(line.substr(0, 2) == "0,");
  std::remove(path.c_str());
}
