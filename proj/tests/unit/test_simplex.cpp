#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "subkam/simplex.hpp"

using namespace subkam;

TEST_CASE("textbook LP") {
  // min -x - y  s.t. x + 2y + s1 = 4, 3x + y + s2 = 6
  LpProblem p{2, 4, {1, 2, 1, 0, 3, 1, 0, 1}, {4, 6}, {-1, -1, 0, 0}};
  const auto s = solve_lp(p);
  REQUIRE(s.status == LpStatus::kOptimal);
  CHECK(s.objective == doctest::Approx(-2.8).epsilon(1e-12));
  CHECK(s.x[0] == doctest::Approx(1.6));
  CHECK(s.x[1] == doctest::Approx(1.2));
}

TEST_CASE("infeasible and unbounded") {
  SUBCASE("infeasible") {
    // x + y = 1 and x + y = 2
    LpProblem p{2, 2, {1, 1, 1, 1}, {1, 2}, {0, 0}};
    CHECK(solve_lp(p).status == LpStatus::kInfeasible);
  }
  SUBCASE("unbounded") {
    // x - y = 0, minimize -x
    LpProblem p{1, 2, {1, -1}, {0}, {-1, 0}};
    CHECK(solve_lp(p).status == LpStatus::kUnbounded);
  }
}

TEST_CASE("redundant rows and negative rhs") {
  LpProblem p{3, 3, {1, 1, 1, 2, 2, 2, -1, 0, 1}, {1, 2, -0.5}, {1, 2, 3}};
  const auto s = solve_lp(p);
  REQUIRE(s.status == LpStatus::kOptimal);
  CHECK(s.redundant_rows == 1);
  // Same LP without the doubled row.
  CHECK(s.objective == doctest::Approx(oracle::brute_force_lp(2, 3, {1, 1, 1, -1, 0, 1}, {1, -0.5}, p.c)));
}

TEST_CASE("random small LPs match vertex enumeration") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  int solved = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int rows = 1 + trial % 3;
    const int cols = rows + 2 + trial % 4;
    LpProblem p;
    p.rows = rows;
    p.cols = cols;
    // Mass row keeps the feasible set bounded; other rows are random.
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) p.A.push_back(i == 0 ? 1.0 : unif(rng));
    std::vector<double> x0(cols);
    double total = 0.0;
    for (auto& v : x0) total += (v = 0.5 + 0.5 * unif(rng));
    for (auto& v : x0) v /= total;
    for (int i = 0; i < rows; ++i) {
      double bi = 0.0;
      for (int j = 0; j < cols; ++j) bi += p.A[i * cols + j] * x0[j];
      p.b.push_back(bi);
    }
    // Degenerate costs every few trials exercise ties.
    for (int j = 0; j < cols; ++j) p.c.push_back(trial % 5 == 0 ? std::round(2.0 * unif(rng)) : unif(rng));
    const auto s = solve_lp(p);
    REQUIRE(s.status == LpStatus::kOptimal);
    const double ref = oracle::brute_force_lp(rows, cols, p.A, p.b, p.c);
    CHECK(s.objective == doctest::Approx(ref).epsilon(1e-9));
    for (double v : s.x) CHECK(v >= 0.0);
    for (int i = 0; i < rows; ++i) {
      double ax = 0.0;
      for (int j = 0; j < cols; ++j) ax += p.A[i * cols + j] * s.x[j];
      CHECK(ax == doctest::Approx(p.b[i]).epsilon(1e-9));
    }
    ++solved;
  }
  CHECK(solved == 200);
}

TEST_CASE("deterministic output") {
  LpProblem p{2, 5, {1, 1, 1, 1, 1, 1, -1, 0, 2, -2}, {1, 0}, {1, 1, 0.5, 1, 1}};
  const auto a = solve_lp(p);
  const auto b = solve_lp(p);
  CHECK(a.x == b.x);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("degenerate closed-measure structure matches vertex enumeration") {
  // Mass row plus rows <q_s, u> over a few states with a symmetric control
  // lattice: b = (1, 0, 0), many columns are affine combinations of others.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int rows = 3, states = 3;
    const std::vector<double> us{-1.0, -0.5, 0.0, 0.5, 1.0};
    const int cols = states * static_cast<int>(us.size());
    LpProblem p;
    p.rows = rows;
    p.cols = cols;
    p.A.assign(rows * cols, 0.0);
    std::vector<double> q(states * 2);
    for (auto& v : q) v = unif(rng);
    for (int s = 0; s < states; ++s)
      for (std::size_t c = 0; c < us.size(); ++c) {
        const int j = s * static_cast<int>(us.size()) + static_cast<int>(c);
        p.A[j] = 1.0;
        p.A[cols + j] = q[2 * s] * us[c];
        p.A[2 * cols + j] = q[2 * s + 1] * us[c];
        p.c.push_back(0.5 * us[c] * us[c] + 0.1 * s + (trial % 3 == 0 ? 0.0 : 0.05 * unif(rng)));
      }
    p.b = {1.0, 0.0, 0.0};
    for (double pert : {0.0, 1e-7}) {
      SimplexOptions o;
      o.perturbation = pert;
      const auto s = solve_lp(p, o);
      REQUIRE(s.status == LpStatus::kOptimal);
      CHECK(s.objective == doctest::Approx(oracle::brute_force_lp(rows, cols, p.A, p.b, p.c)).epsilon(1e-9));
      for (double v : s.x) CHECK(v >= 0.0);
    }
  }
}

TEST_CASE("reinversion interval does not change the answer") {
  LpProblem p{2, 5, {1, 1, 1, 1, 1, 1, -1, 0, 2, -2}, {1, 0}, {1, 1, 0.5, 1, 1}};
  const double ref = solve_lp(p).objective;
  for (int every : {0, 1, 3}) {
    SimplexOptions o;
    o.refactor_every = every;
    CHECK(solve_lp(p, o).objective == doctest::Approx(ref).epsilon(1e-12));
  }
}
