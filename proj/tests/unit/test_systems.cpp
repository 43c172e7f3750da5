#include <doctest.h>

#include <cmath>
#include <random>

#include "subkam/systems.hpp"

using namespace subkam;

namespace {

Vec v1(double a) {
  Vec v(1);
  v << a;
  return v;
}
Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}
Vec v3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

ControlSystem rotation_system() {
  // f_1 = (1, 0) + R x with R a rotation generator: nonlinear flow, so RK4 is not exact.
  Mat a(2, 2);
  a << 0.0, -1.0, 1.0, 0.0;
  Mat z = Mat::Zero(2, 2);
  return affine_system("rotation", {AffineField{a, v2(1.0, 0.0)}, AffineField{z, v2(0.0, 1.0)}}, 2.0);
}

}  // namespace

TEST_CASE("eval_fields on built-in systems") {
  CHECK(euclidean(1).eval_fields(v1(3.7))(0, 0) == 1.0);

  const auto h = heisenberg();
  const Mat f0 = h.eval_fields(v3(0, 0, 0));
  CHECK(f0.col(0).isApprox(v3(1, 0, 0)));
  CHECK(f0.col(1).isApprox(v3(0, 1, 0)));

  const Mat f1 = h.eval_fields(v3(2, 4, 0));
  CHECK((f1.col(0) - v3(1, 0, -2)).norm() == 0.0);
  CHECK((f1.col(1) - v3(0, 1, 1)).norm() == 0.0);
}

TEST_CASE("eval_fields rejects non-finite input") {
  const auto h = heisenberg();
  CHECK_THROWS_AS(h.eval_fields(v3(NAN, 0, 0)), Error);
  try {
    h.eval_fields(v3(INFINITY, 0, 0));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidSystem);
  }
}

TEST_CASE("construction validates dimensions") {
  CHECK_THROWS_AS(euclidean(0), Error);
  CHECK_THROWS_AS(euclidean(kMaxDim + 1), Error);
}

TEST_CASE("integrate examples") {
  SUBCASE("euclidean u = 1") {
    const auto sys = euclidean(1);
    const auto pair = integrate(sys, v1(0.0), std::vector<Vec>(100, v1(1.0)), make_time_grid(0, 1, 100));
    CHECK(pair.states.size() == 101);
    CHECK(std::fabs(pair.states.back()(0) - 1.0) <= 1e-10);
    CHECK_FALSE(pair.action.has_value());
  }
  SUBCASE("heisenberg u = (1,0)") {
    const auto sys = heisenberg();
    const auto pair = integrate(sys, v3(0, 0, 0), std::vector<Vec>(50, v2(1, 0)), make_time_grid(0, 1, 50));
    CHECK((pair.states.back() - v3(1, 0, 0)).norm() <= 1e-9);
  }
  SUBCASE("zero control fixes every point exactly") {
    const auto sys = heisenberg();
    const Vec x0 = v3(0.3, -1.2, 2.5);
    const auto pair = integrate(sys, x0, std::vector<Vec>(20, v2(0, 0)), make_time_grid(0, 3, 20));
    for (const auto& s : pair.states) CHECK((s - x0).norm() == 0.0);
  }
}

TEST_CASE("integrate errors") {
  const auto sys = euclidean(1);
  CHECK_THROWS_AS(integrate(sys, v1(0), std::vector<Vec>(3, v1(1)), make_time_grid(0, 1, 4)), Error);
  try {
    integrate(sys, v1(0), std::vector<Vec>(2, v1(1e7)), make_time_grid(0, 1, 2));
    FAIL("expected blow-up");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kBlowUp);
  }
}

TEST_CASE("states satisfy the one-step relation") {
  const auto sys = heisenberg();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Vec> controls;
  for (int k = 0; k < 40; ++k) controls.push_back(v2(u(rng), u(rng)));
  const auto grid = make_time_grid(0, 2, 40);
  const auto pair = integrate(sys, v3(0.1, 0.2, 0.3), controls, grid);
  for (int k = 0; k < 40; ++k) {
    CHECK((rk4_step(sys, pair.states[k], controls[k], grid.dt()) - pair.states[k + 1]).norm() <= 1e-9);
  }
  CHECK(std::isfinite(pair.energy()));
}

TEST_CASE("heisenberg flows with constant control are integrated exactly") {
  // Constant-control solutions are polynomials of degree <= 2 in t.
  const auto sys = heisenberg();
  const Vec x0 = v3(1, 0, 0);
  const auto pair = integrate(sys, x0, std::vector<Vec>(7, v2(1, 1)), make_time_grid(0, 1, 7));
  // x = 1 + t, y = t, z' = (-y + x)/2 = 1/2
  CHECK((pair.states.back() - v3(2, 1, 0.5)).norm() <= 1e-14);
}

TEST_CASE("integrator is fourth order on a nonlinear flow") {
  const auto sys = rotation_system();
  const Vec x0 = v2(0.5, -0.2);
  const Vec u = v2(1.0, 1.0);
  auto endpoint = [&](int n) {
    return integrate(sys, x0, std::vector<Vec>(n, u), make_time_grid(0, 2, n)).states.back();
  };
  const Vec ref = endpoint(4096);
  const double e1 = (endpoint(16) - ref).norm();
  const double e2 = (endpoint(32) - ref).norm();
  const double ratio = e1 / e2;
  CHECK(ratio > 13.0);
  CHECK(ratio < 19.0);
}

TEST_CASE("time reversal returns to the start") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (const auto& sys : {heisenberg(), rotation_system()}) {
    const int n = 200;
    std::vector<Vec> controls;
    for (int k = 0; k < n; ++k) controls.push_back(sys.d() == 3 ? v2(u(rng), u(rng)) : v2(u(rng), u(rng)));
    const Vec x0 = Vec::Constant(sys.d(), 0.25);
    const auto grid = make_time_grid(0, 1, n);
    const auto fwd = integrate(sys, x0, controls, grid);
    std::vector<Vec> back;
    for (int k = n - 1; k >= 0; --k) back.push_back(-controls[k]);
    const auto rev = integrate(sys, fwd.states.back(), back, grid);
    CHECK((rev.states.back() - x0).norm() <= 1e-8);
  }
}

TEST_CASE("step Jacobians match finite differences") {
  const auto sys = rotation_system();
  const auto h = heisenberg();
  for (const auto* s : {&sys, &h}) {
    const Vec x = Vec::Constant(s->d(), 0.3);
    Vec u(s->m());
    u.setLinSpaced(s->m(), 0.4, -0.7);
    const double dt = 0.1;
    const auto j = rk4_step_with_jacobians(*s, x, u, dt);
    const double eps = 1e-6;
    for (int i = 0; i < s->d(); ++i) {
      Vec xp = x, xm = x;
      xp(i) += eps;
      xm(i) -= eps;
      const Vec col = (rk4_step(*s, xp, u, dt) - rk4_step(*s, xm, u, dt)) / (2 * eps);
      CHECK((col - j.dx.col(i)).norm() <= 1e-8);
    }
    for (int i = 0; i < s->m(); ++i) {
      Vec up = u, um = u;
      up(i) += eps;
      um(i) -= eps;
      const Vec col = (rk4_step(*s, x, up, dt) - rk4_step(*s, x, um, dt)) / (2 * eps);
      CHECK((col - j.du.col(i)).norm() <= 1e-8);
    }
  }
}

TEST_CASE("check_f1_f2 diagnostics") {
  SUBCASE("euclidean") {
    const auto rep = check_f1_f2(euclidean(2), 3.0, 200, 1);
    CHECK(rep.max_growth_ratio <= 1.0);
    CHECK(rep.min_singular_value == doctest::Approx(1.0));
    CHECK_FALSE(rep.growth_violation);
    CHECK_FALSE(rep.rank_deficiency_found);
  }
  SUBCASE("heisenberg sigma_min >= 1") {
    const auto rep = check_f1_f2(heisenberg(), 2.0, 500, 2);
    CHECK(rep.min_singular_value >= 1.0 - 1e-12);
    CHECK_FALSE(rep.rank_violation);
    CHECK_FALSE(rep.growth_violation);
  }
  SUBCASE("grushin loses rank at x = 0") {
    const auto sys = grushin();
    CHECK(sys.experimental());
    const auto rep = check_f1_f2(sys, 1.0, 50, 3);
    CHECK(rep.rank_deficiency_found);
    CHECK(rep.min_singular_value == 0.0);
    CHECK(rep.worst_rank_point.norm() == 0.0);
    CHECK_FALSE(rep.rank_violation);  // rank_ok_everywhere is not claimed
  }
  SUBCASE("claimed growth constant too small is flagged") {
    Mat a = Mat::Identity(1, 1) * 3.0;
    const auto sys = affine_system("steep", {AffineField{a, v1(0.0)}}, 1.0);
    CHECK(check_f1_f2(sys, 2.0, 100, 4).growth_violation);
  }
}
