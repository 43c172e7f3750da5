#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "subkam/action.hpp"
#include "subkam/measures.hpp"

using namespace subkam;

namespace {

Vec v1(double a) {
  Vec v(1);
  v << a;
  return v;
}

Lagrangian well_1d() { return quadratic_lagrangian("well", rational_well(1, 1), 1, {1.0, v1(0.0), 0.5}); }

TrajectoryControlPair constant_pair(const Vec& x, const Vec& u, double T, int n) {
  TrajectoryControlPair p;
  p.grid = make_time_grid(0.0, T, n);
  p.states.assign(n + 1, x);
  p.controls.assign(n, u);
  return p;
}

}  // namespace

TEST_CASE("measure grid") {
  MeasureGrid g(2, 1, 1.0, 5, 1.0, 3);
  // 5x5 nodes on [-1,1]^2 inside the unit disc: corners and the 8 near-corner nodes drop out.
  CHECK(g.state_nodes().size() == 13);
  CHECK(g.control_nodes().size() == 3);
  CHECK(g.size() == 39);
  CHECK_THROWS_AS(g.nearest_state(Vec::Constant(2, 0.8)), Error);
  const auto s = g.nearest_state(Vec::Constant(2, 0.6));
  CHECK(g.state_nodes()[s].norm() <= 1.0);
}

TEST_CASE("occupation measure") {
  auto grid = std::make_shared<const MeasureGrid>(1, 1, 2.0, 41, 2.0, 21);
  SUBCASE("rest pair is a Dirac") {
    const auto mu = occupation_measure(constant_pair(v1(0.0), v1(0.0), 3.0, 30), grid);
    const auto s = grid->nearest_state(v1(0.0));
    const auto c = grid->nearest_control(v1(0.0));
    CHECK(mu.weight(s, c) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(mu.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(closedness_residual(mu, euclidean(1), TestFunctionBasis::monomials(1, 4)) == 0.0);
  }
  SUBCASE("two halves") {
    TrajectoryControlPair p = constant_pair(v1(0.5), v1(0.0), 2.0, 2);
    p.states[1] = v1(-0.5);
    const auto mu = occupation_measure(p, grid);
    CHECK(mu.weight(grid->nearest_state(v1(0.5)), 10) == doctest::Approx(0.5));
    CHECK(mu.weight(grid->nearest_state(v1(-0.5)), 10) == doctest::Approx(0.5));
  }
  SUBCASE("leaving the ball") {
    CHECK_THROWS_AS(occupation_measure(constant_pair(v1(2.5), v1(0.0), 1.0, 4), grid), Error);
  }
  SUBCASE("closed loop has small residual") {
    // x(t) = sin(2 pi t / T) on one period, nearest-node errors only.
    const double T = 4.0;
    const int n = 4000;
    TrajectoryControlPair p;
    p.grid = make_time_grid(0.0, T, n);
    const double w = 2.0 * std::numbers::pi / T;
    for (int k = 0; k <= n; ++k) p.states.push_back(v1(std::sin(w * p.grid.time(k))));
    for (int k = 0; k < n; ++k) p.controls.push_back(v1(w * std::cos(w * p.grid.time(k))));
    const auto mu = occupation_measure(p, grid);
    CHECK(closedness_residual(mu, euclidean(1), TestFunctionBasis::monomials(1, 4)) <= grid->state_spacing());
  }
  SUBCASE("integral matches the trajectory average") {
    const auto L = well_1d();
    OptimizerSettings s;
    s.n_steps = 400;
    s.n_restarts = 1;
    const double T = 20.0;
    const auto res = value_free(L, euclidean(1), v1(1.0), T, s);
    const auto mu = occupation_measure(res.pair, grid);
    CHECK(std::abs(mu.integrate(L) - res.value / T) <= 2e-2);
  }
}

TEST_CASE("test function bases") {
  const auto mono = TestFunctionBasis::monomials(2, 3);
  CHECK(mono.size() == 9);  // 2 + 3 + 4
  Vec x(2);
  x << 0.3, -0.7;
  for (std::size_t k = 0; k < mono.size(); ++k) {
    const Vec g = mono.gradient(k, x);
    for (int i = 0; i < 2; ++i) {
      Vec a = x, b = x;
      a[i] += 1e-6;
      b[i] -= 1e-6;
      CHECK(g[i] == doctest::Approx((mono.value(k, a) - mono.value(k, b)) / 2e-6).epsilon(1e-6));
    }
  }
  const auto hats = TestFunctionBasis::hat_functions(1, 1.0, 5);
  CHECK(hats.size() == 5);
  CHECK(hats.value(2, v1(0.0)) == 1.0);
  CHECK(hats.value(2, v1(0.25)) == doctest::Approx(0.5));
  CHECK(hats.gradient(2, v1(0.25))[0] == doctest::Approx(-2.0));
  CHECK(TestFunctionBasis::constant(3).gradient(0, Vec::Ones(3)).norm() == 0.0);
}

TEST_CASE("lp_critical examples") {
  const auto L = well_1d();
  const auto sys = euclidean(1);
  LpCriticalConfig cfg;
  cfg.R = 2.0;
  cfg.U = 2.0;
  cfg.n_x = 41;
  cfg.n_u = 21;

  SUBCASE("constants only gives the grid minimum") {
    const auto r = lp_critical(L.shifted(0.3), sys, cfg, TestFunctionBasis::constant(1));
    double mn = 1e300;
    const MeasureGrid g(1, 1, cfg.R, cfg.n_x, cfg.U, cfg.n_u);
    for (const auto& x : g.state_nodes())
      for (const auto& u : g.control_nodes()) mn = std::min(mn, L.value(x, u) + 0.3);
    CHECK(r.c_lp == doctest::Approx(mn).epsilon(1e-12));
  }
  SUBCASE("monomials up to degree 4") {
    const auto r = lp_critical(L, sys, cfg, TestFunctionBasis::monomials(1, 4));
    CHECK(r.c_lp >= -5e-2);
    CHECK(r.c_lp <= 5e-2);
    CHECK(r.residual <= 1e-8);
    CHECK(r.mu_star->total_mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(r.boundary_flag);
    // Concentration near (0, 0).
    double near = 0.0;
    const auto& g = r.mu_star->grid();
    for (std::size_t s = 0; s < g.state_nodes().size(); ++s)
      for (std::size_t c = 0; c < g.control_nodes().size(); ++c)
        if (g.state_nodes()[s].norm() <= 0.3 && g.control_nodes()[c].norm() <= 0.3) near += r.mu_star->weight(s, c);
    CHECK(near >= 0.9);
  }
  SUBCASE("monotone in the basis") {
    const auto full = TestFunctionBasis::monomials(1, 4);
    double prev = -1e300;
    for (std::size_t k = 1; k <= full.size(); ++k) {
      const auto r = lp_critical(L, sys, cfg, full.prefix(k));
      CHECK(r.c_lp >= prev - 1e-10);
      CHECK(r.residual <= 1e-8);
      prev = r.c_lp;
    }
  }
  SUBCASE("hat basis") {
    const auto r = lp_critical(L, sys, cfg, TestFunctionBasis::hat_functions(1, 2.0, 9));
    CHECK(r.residual <= 1e-8);
    CHECK(r.c_lp <= L.value(v1(0.0), v1(0.0)) + 1e-12);
  }
  SUBCASE("double well") {
    const auto dw = quadratic_lagrangian("dw", double_well(1), 1, {1.5, v1(-1.0), 1.5}, 10.0);
    const auto r = lp_critical(dw, sys, cfg, TestFunctionBasis::monomials(1, 4));
    CHECK(std::abs(r.c_lp) <= 5e-2);
    CHECK(r.residual <= 1e-8);
  }
}

TEST_CASE("heisenberg closed-measure LP stays at the Dirac value") {
  // L >= 0 with equality only at (0, 0), so the optimum is exactly 0; the
  // lattice LP is highly degenerate and used to break the simplex.
  const auto L = quadratic_lagrangian("heis", rational_well(3, 2), 2, {1.0, Vec::Zero(3), 0.5});
  for (int n : {5, 7}) {
    LpCriticalConfig cfg;
    cfg.R = 2.0;
    cfg.n_x = n;
    cfg.n_u = n;
    const auto r = lp_critical(L, heisenberg(), cfg, TestFunctionBasis::monomials(3, 4));
    CHECK(std::abs(r.c_lp) <= 1e-9);
    CHECK(r.residual <= 1e-8);
    CHECK(r.mu_star->total_mass() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("dual bound") {
  const auto L = well_1d();
  const auto sys = euclidean(1);
  DualBoundConfig cfg;
  cfg.max_sweeps = 10;
  const auto r = dual_bound(L, sys, {}, cfg);
  // psi = 0: -max_x H(x, 0) = min_x V = 0.
  CHECK(r.bound_at_initial == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.bound >= r.bound_at_initial);
  LpCriticalConfig lc;
  lc.R = 2.0;
  lc.U = 2.0;
  const auto lp = lp_critical(L, sys, lc, TestFunctionBasis::monomials(1, 4));
  CHECK(r.bound <= lp.c_lp + 5e-2);

  SUBCASE("shifted well") {
    const auto r2 = dual_bound(L.shifted(0.25), sys, {}, cfg);
    CHECK(r2.bound_at_initial == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("heisenberg") {
    const auto H = quadratic_lagrangian("h", rational_well(3, 2), 2, {1.0, Vec::Zero(3), 0.5});
    DualBoundConfig c3;
    c3.sample_n = 9;
    c3.max_sweeps = 0;
    const auto r3 = dual_bound(H, heisenberg(), {}, c3);
    CHECK(r3.bound_at_initial == doctest::Approx(0.0).epsilon(1e-12));
  }
}
