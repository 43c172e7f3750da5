#pragma once

#include <cstddef>
#include <vector>

namespace subkam {

/// min c^T x subject to A x = b, x >= 0. A is row-major rows x cols.
struct LpProblem {
  int rows = 0;
  int cols = 0;
  std::vector<double> A;
  std::vector<double> b;
  std::vector<double> c;
};

struct SimplexOptions {
  double pivot_tol = 1e-11;
  double feasibility_tol = 1e-9;
  long max_iterations = 5'000'000;
  /// The tableau is rebuilt from the original data by an LU solve with the
  /// current basis after this many pivots, bounding accumulated roundoff.
  int refactor_every = 64;
  /// Relative size of the deterministic right-hand-side perturbation used to
  /// break degenerate ratio ties. The final basis is re-evaluated with the
  /// exact b; 0 disables it.
  double perturbation = 1e-7;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

const char* to_string(LpStatus s) noexcept;

struct LpSolution {
  LpStatus status = LpStatus::kIterationLimit;
  double objective = 0.0;
  std::vector<double> x;
  long iterations = 0;
  long phase1_iterations = 0;
  int redundant_rows = 0;
};

/// Dense two-phase tableau simplex with Bland's rule: entering column is the
/// lowest index with negative reduced cost, ratio-test ties go to the lowest
/// basic index. Deterministic for a given input.
LpSolution solve_lp(const LpProblem& problem, const SimplexOptions& options = {});

}  // namespace subkam
