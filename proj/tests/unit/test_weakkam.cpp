#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "subkam/weakkam.hpp"

using namespace subkam;

namespace {

Vec v1(double a) {
  Vec v(1);
  v << a;
  return v;
}

Lagrangian well_1d() { return quadratic_lagrangian("well", rational_well(1, 1), 1, {1.0, v1(0.0), 0.5}); }
Lagrangian double_well_1d() { return quadratic_lagrangian("dw", double_well(1), 1, {1.5, v1(-1.0), 1.5}, 10.0); }

HjConfig hj_1d() {
  HjConfig c{cube_geometry(1, 3.0, 121), {}, false, {}};
  c.scheme.dt = 0.05;
  c.scheme.U = 2.0;
  c.scheme.control_samples = 41;
  return c;
}

BarrierSettings barrier_settings(double max_dt = 0.1) {
  BarrierSettings b;
  b.optimizer.n_steps = 20;
  b.optimizer.max_dt = max_dt;
  b.optimizer.n_restarts = 2;
  b.optimizer.seed = 1;
  return b;
}

GridFunction agmon_grid(int n = 401) {
  return GridFunction::from(cube_geometry(1, 2.0, n), [](const Vec& x) { return oracle::agmon_rational_well(x[0]); });
}

}  // namespace

TEST_CASE("extrapolation") {
  CHECK(extrapolate_linear({0.1, 0.2, 0.4}, {1.1, 1.2, 1.4}) == doctest::Approx(1.0));
  CHECK(extrapolate_linear({0.5}, {3.0}) == 3.0);
}

TEST_CASE("time average estimator") {
  const auto L = well_1d();
  const auto sys = euclidean(1);
  const std::vector<double> Ts{25, 50, 100, 200};
  const auto e = critical_time_average(L, sys, v1(0.5), Ts, hj_1d());
  CHECK(e.method == EstimateMethod::kTimeAverage);
  CHECK(std::abs(e.value) <= 5e-2);
  CHECK(e.ladder.size() == 4);
  CHECK(e.error_proxy >= 0.0);
  const auto shifted = critical_time_average(L.shifted(1.0), sys, v1(0.5), Ts, hj_1d());
  CHECK(shifted.value - e.value == doctest::Approx(1.0).epsilon(1e-3));
  const auto at_star = critical_time_average(L, sys, v1(0.0), Ts, hj_1d());
  for (const auto& entry : at_star.ladder) CHECK(entry.estimate == 0.0);
  CHECK_THROWS_AS(critical_time_average(L, sys, v1(0.5), {10.0}, hj_1d()), Error);
}

TEST_CASE("Abel estimator") {
  const auto sys = euclidean(1);
  const std::vector<double> lambdas{0.1, 0.05, 0.02, 0.01};
  const auto e = critical_abel(well_1d(), sys, v1(0.5), lambdas, hj_1d());
  CHECK(std::abs(e.value) <= 5e-2);
  const auto flat = critical_abel(energy_lagrangian(1, 1), sys, v1(0.5), lambdas, hj_1d());
  for (const auto& entry : flat.ladder) CHECK(entry.estimate == 0.0);
}

TEST_CASE("LP estimator") {
  const auto L = well_1d();
  LpEstimateConfig cfg;
  cfg.R = 2.0;
  cfg.U = 2.0;
  cfg.ladder = {{21, 21, 4}, {41, 41, 4}, {81, 41, 4}};
  cfg.dual.max_sweeps = 8;
  const auto e = critical_lp(L, euclidean(1), cfg);
  CHECK(std::abs(e.value) <= 5e-2);
  CHECK(e.value <= L.value(v1(0.0), v1(0.0)) + 1e-9);
  REQUIRE(e.dual_bound.has_value());
  CHECK(*e.dual_bound <= e.value + 5e-2);
  CHECK(*e.lp_residual <= 1e-8);
}

TEST_CASE("Peierls barrier") {
  const auto L = well_1d();
  const auto sys = euclidean(1);
  const auto bs = barrier_settings();
  CHECK(std::abs(peierls_barrier(L, sys, v1(0.0), v1(0.0), 0.0, bs).h) <= 1e-2);
  for (double x : {-1.0, 0.6, 1.5}) {
    const auto b = peierls_barrier(L, sys, v1(0.0), v1(x), 0.0, bs);
    CHECK(std::abs(b.h - oracle::agmon_rational_well(x)) <= 5e-2);
    CHECK(b.horizons.size() == 12);
    CHECK(b.tail_slope >= -1e-3);
    for (std::size_t i = b.values.size() / 2; i < b.values.size(); ++i) CHECK(b.h <= b.values[i]);
  }
  const double hxy = peierls_barrier(L, sys, v1(0.8), v1(-0.4), 0.0, bs).h;
  const double hyz = peierls_barrier(L, sys, v1(-0.4), v1(1.1), 0.0, bs).h;
  const double hxz = peierls_barrier(L, sys, v1(0.8), v1(1.1), 0.0, bs).h;
  CHECK(hxz <= hxy + hyz + 2e-2);
}

TEST_CASE("Aubry detection") {
  const auto sys = euclidean(1);
  const auto probes = probe_lattice(1, 1.5, 0.25);
  CHECK(probes.size() == 13);
  SUBCASE("single well") {
    const auto rep = aubry_detect(well_1d(), sys, 0.0, probes, barrier_settings());
    REQUIRE_FALSE(rep.members.empty());
    for (auto i : rep.members) CHECK(std::abs(rep.points[i][0]) <= 0.25 + 1e-12);
    CHECK(std::find(rep.members.begin(), rep.members.end(), rep.x_star_index) != rep.members.end());
  }
  SUBCASE("double well") {
    const auto rep = aubry_detect(double_well_1d(), sys, 0.0, probes, barrier_settings());
    bool plus = false, minus = false;
    for (auto i : rep.members) {
      const double x = rep.points[i][0];
      CHECK(std::abs(std::abs(x) - 1.0) <= 0.25 + 1e-12);
      plus = plus || std::abs(x - 1.0) <= 0.25;
      minus = minus || std::abs(x + 1.0) <= 0.25;
    }
    CHECK(plus);
    CHECK(minus);
  }
}

TEST_CASE("horizontal gradient") {
  SUBCASE("linear data, identity fields") {
    const auto g = cube_geometry(2, 1.0, 11);
    const auto psi = GridFunction::from(g, [](const Vec& x) { return 0.7 * x[0] - 1.3 * x[1]; });
    Vec x(2);
    x << 0.13, -0.21;
    const auto hg = horizontal_gradient(psi, euclidean(2), x);
    CHECK(hg.q[0] == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(hg.q[1] == doctest::Approx(-1.3).epsilon(1e-12));
    CHECK(hg.differentiable);
  }
  SUBCASE("vertical coordinate on Heisenberg") {
    const auto psi = GridFunction::from(cube_geometry(3, 1.0, 11), [](const Vec& x) { return x[2]; });
    const auto hg = horizontal_gradient(psi, heisenberg(), Vec::Zero(3));
    CHECK(hg.q.norm() <= 1e-14);
  }
  SUBCASE("Agmon solution") {
    const auto hg = horizontal_gradient(agmon_grid(), euclidean(1), v1(1.0));
    CHECK(hg.q[0] == doctest::Approx(std::sqrt(2.0 * 0.5)).epsilon(5e-3));
  }
  SUBCASE("edge") {
    CHECK_THROWS_AS(horizontal_gradient(agmon_grid(), euclidean(1), v1(1.995)), Error);
  }
}

TEST_CASE("calibrated curves and the superdifferential check") {
  const auto L = well_1d();
  const auto sys = euclidean(1);
  const auto chi = agmon_grid();
  SUBCASE("rest at x*") {
    const auto rep = calibrated_curve(chi, L, sys, v1(0.0), 0.0, 5.0, 0.01);
    CHECK(rep.defect <= 1e-6);
    CHECK(rep.gradient_identity_residual <= 5e-2);
    CHECK_FALSE(rep.truncated);
    for (const auto& s : rep.pair.states) CHECK(std::abs(s[0]) <= 1e-12);
  }
  SUBCASE("off the Aubry set the backward leg still calibrates") {
    const auto rep = calibrated_curve(chi, L, sys, v1(1.0), 0.0, 3.0, 0.01);
    CHECK(rep.defect_per_unit_time <= 1e-2);
    CHECK(rep.gradient_identity_residual <= 5e-2);
  }
  SUBCASE("argmin backtracking agrees with the feedback curve") {
    SchemeSettings s;
    s.dt = 5e-3;
    s.U = 2.0;
    s.control_samples = 41;
    const auto table = argmin_backtrack(chi, L, sys, v1(1.0), 3.0, s);
    REQUIRE(table.grid.n_steps > 0);
    CHECK(table.grid.t1 == 0.0);
    CHECK(table.states.back()[0] == doctest::Approx(1.0));
    CHECK(std::abs(table.states.front()[0]) < 0.5);
    for (std::size_t k = 1; k < table.states.size(); ++k) CHECK(table.states[k][0] >= table.states[k - 1][0]);
    const auto feedback = calibrated_curve(chi, L, sys, v1(1.0), 0.0, 3.0, 0.01);
    const double gap = curve_distance(table, feedback.pair);
    MESSAGE("table/feedback distance " << gap);
    CHECK(gap <= 5e-2);
    const auto rest = argmin_backtrack(chi, L, sys, v1(0.0), 1.0, s);
    for (const auto& x : rest.states) CHECK(x[0] == 0.0);
  }
  SUBCASE("superdifferential residual") {
    std::vector<Vec> pts;
    for (double x = -1.5; x <= 1.5; x += 0.1) pts.push_back(v1(x));
    CHECK(superdifferential_equation_check(chi, L, sys, 0.0, pts).max_residual <= 5e-2);
    CHECK(superdifferential_equation_check(chi, L, sys, 0.0, {v1(0.0)}).max_residual <= 1e-12);
    CHECK(superdifferential_equation_check(chi, L, sys, 0.1, pts).max_residual >= 5e-2);
  }
}
