#include "subkam/simplex.hpp"

#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>

#include "subkam/core.hpp"
#include "subkam/simd/kernels.hpp"

namespace subkam {

const char* to_string(LpStatus s) noexcept {
  switch (s) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kUnbounded: return "unbounded";
    case LpStatus::kIterationLimit: return "iteration-limit";
  }
  return "unknown";
}

namespace {

class Tableau {
 public:
  // Columns: [0, n) structural, [n, n + m) artificial, n + m is the rhs.
  Tableau(const LpProblem& p, double perturbation) : m_(p.rows), n_(p.cols), width_(p.cols + p.rows + 1) {
    data_.assign(static_cast<std::size_t>(m_ + 1) * width_, 0.0);
    basis_.resize(m_);
    exact_rhs_.resize(m_);
    for (int i = 0; i < m_; ++i) {
      const double sign = p.b[i] < 0.0 ? -1.0 : 1.0;
      auto r = row(i);
      for (int j = 0; j < n_; ++j) r[j] = sign * p.A[static_cast<std::size_t>(i) * n_ + j];
      r[n_ + i] = 1.0;
      exact_rhs_[i] = sign * p.b[i];
      // Distinct positive shifts per row (fractional parts of i * golden ratio).
      const double spread = 0.5 + 0.5 * std::fmod(0.6180339887498949 * (i + 1), 1.0);
      r[rhs()] = exact_rhs_[i] + perturbation * (1.0 + exact_rhs_[i]) * spread;
      basis_[i] = n_ + i;
    }
    original_.assign(data_.begin(), data_.begin() + static_cast<std::ptrdiff_t>(m_) * width_);
  }

  // Puts the unperturbed right-hand side back; takes effect at the next reinvert.
  void restore_rhs() {
    for (int i = 0; i < m_; ++i) original_[static_cast<std::size_t>(i) * width_ + rhs()] = exact_rhs_[i];
  }

  double min_rhs() {
    double mn = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m_; ++i) mn = std::min(mn, row(i)[rhs()]);
    return mn;
  }

  // Recomputes B^-1 [A | I | b] for the current basis and the reduced costs
  // for the given column costs (size n + m).
  void reinvert(const std::vector<double>& costs, double feasibility_tol) {
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::Map<const RowMat> M(original_.data(), m_, static_cast<Eigen::Index>(width_));
    RowMat B(m_, m_);
    for (int i = 0; i < m_; ++i) B.col(i) = M.col(basis_[i]);
    const Eigen::PartialPivLU<RowMat> lu(B);
    Eigen::Map<RowMat> T(data_.data(), m_, static_cast<Eigen::Index>(width_));
    T = lu.solve(M);
    for (int i = 0; i < m_; ++i) {
      auto r = row(i);
      r[basis_[i]] = 1.0;
      if (r[rhs()] < 0.0 && r[rhs()] > -feasibility_tol) r[rhs()] = 0.0;
    }
    auto cr = cost();
    std::fill(cr.begin(), cr.end(), 0.0);
    for (int j = 0; j < n_ + m_; ++j) cr[j] = costs[j];
    for (int i = 0; i < m_; ++i)
      if (costs[basis_[i]] != 0.0) simd::axpy(cr, row(i), -costs[basis_[i]]);
    for (int i = 0; i < m_; ++i) cr[basis_[i]] = 0.0;
  }

  std::span<double> row(int i) { return {data_.data() + static_cast<std::size_t>(i) * width_, width_}; }
  std::span<double> cost() { return row(m_); }
  int rhs() const { return n_ + m_; }
  int m() const { return m_; }
  int n() const { return n_; }
  std::vector<int>& basis() { return basis_; }

  void pivot(int r, int col) {
    auto pr = row(r);
    simd::scale(pr, 1.0 / pr[col]);
    pr[col] = 1.0;
    for (int i = 0; i <= m_; ++i) {
      if (i == r) continue;
      auto ri = row(i);
      const double f = ri[col];
      if (f == 0.0) continue;
      simd::axpy(ri, pr, -f);
      ri[col] = 0.0;
    }
    basis_[r] = col;
  }

  // Bland ratio test; -1 if the column is unbounded.
  int leaving_row(int col, double pivot_tol) {
    int best = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m_; ++i) {
      auto ri = row(i);
      const double a = ri[col];
      if (a <= pivot_tol) continue;
      const double ratio = ri[rhs()] / a;
      if (ratio < best_ratio || (ratio == best_ratio && basis_[i] < basis_[best])) {
        best = i;
        best_ratio = ratio;
      }
    }
    return best;
  }

 private:
  int m_;
  int n_;
  std::size_t width_;
  std::vector<double> data_;
  std::vector<double> original_;
  std::vector<double> exact_rhs_;
  std::vector<int> basis_;
};

// Runs pivots until no entering column in [0, limit) has reduced cost below -tol.
LpStatus iterate(Tableau& t, int limit, const std::vector<double>& costs, const SimplexOptions& o,
                 long& iterations) {
  t.reinvert(costs, o.feasibility_tol);
  double cost_scale = 1.0;
  {
    auto cr = t.cost();
    for (int j = 0; j < limit; ++j) cost_scale = std::max(cost_scale, std::fabs(cr[j]));
  }
  const double tol = o.pivot_tol * cost_scale;
  int since_reinvert = 0;
  while (true) {
    if (iterations >= o.max_iterations) return LpStatus::kIterationLimit;
    if (o.refactor_every > 0 && since_reinvert >= o.refactor_every) {
      t.reinvert(costs, o.feasibility_tol);
      since_reinvert = 0;
    }
    auto cr = t.cost();
    const std::size_t entering = simd::first_below(cr.first(static_cast<std::size_t>(limit)), -tol);
    if (entering == static_cast<std::size_t>(limit)) return LpStatus::kOptimal;
    const int leave = t.leaving_row(static_cast<int>(entering), o.pivot_tol);
    if (leave < 0) return LpStatus::kUnbounded;
    t.pivot(leave, static_cast<int>(entering));
    ++iterations;
    ++since_reinvert;
  }
}

// Indices of a maximal set of linearly independent rows, in increasing order.
// Rows are scaled to unit max-norm first so the rank threshold is relative.
std::vector<int> independent_rows(const LpProblem& p) {
  Eigen::MatrixXd At(p.cols, p.rows);
  for (int i = 0; i < p.rows; ++i) {
    double mx = 0.0;
    for (int j = 0; j < p.cols; ++j) mx = std::max(mx, std::fabs(p.A[static_cast<std::size_t>(i) * p.cols + j]));
    for (int j = 0; j < p.cols; ++j)
      At(j, i) = mx > 0.0 ? p.A[static_cast<std::size_t>(i) * p.cols + j] / mx : 0.0;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(At);
  qr.setThreshold(1e-9);
  std::vector<int> keep;
  for (Eigen::Index k = 0; k < qr.rank(); ++k) keep.push_back(static_cast<int>(qr.colsPermutation().indices()[k]));
  std::sort(keep.begin(), keep.end());
  return keep;
}

LpSolution solve_full_rank(const LpProblem& p, const SimplexOptions& o, double perturbation);

}  // namespace

LpSolution solve_lp(const LpProblem& p, const SimplexOptions& o) {
  if (p.rows < 0 || p.cols <= 0 || p.A.size() != static_cast<std::size_t>(p.rows) * p.cols ||
      p.b.size() != static_cast<std::size_t>(p.rows) || p.c.size() != static_cast<std::size_t>(p.cols)) {
    throw Error(ErrorKind::kInvalidArgument, "solve_lp: inconsistent problem dimensions");
  }
  // Dependent rows would leave the basis numerically singular; drop them and
  // check afterwards that the solution satisfies them.
  const std::vector<int> keep = independent_rows(p);
  if (static_cast<int>(keep.size()) == p.rows) return solve_full_rank(p, o, o.perturbation);
  LpProblem reduced;
  reduced.rows = static_cast<int>(keep.size());
  reduced.cols = p.cols;
  reduced.c = p.c;
  for (int i : keep) {
    reduced.A.insert(reduced.A.end(), p.A.begin() + static_cast<std::ptrdiff_t>(i) * p.cols,
                     p.A.begin() + static_cast<std::ptrdiff_t>(i + 1) * p.cols);
    reduced.b.push_back(p.b[i]);
  }
  LpSolution sol = solve_full_rank(reduced, o, o.perturbation);
  sol.redundant_rows += p.rows - reduced.rows;
  if (sol.status != LpStatus::kOptimal) return sol;
  double bscale = 1.0;
  for (double v : p.b) bscale = std::max(bscale, std::fabs(v));
  for (int i = 0; i < p.rows; ++i) {
    if (std::binary_search(keep.begin(), keep.end(), i)) continue;
    double r = -p.b[i];
    for (int j = 0; j < p.cols; ++j) r += p.A[static_cast<std::size_t>(i) * p.cols + j] * sol.x[j];
    if (std::fabs(r) > o.feasibility_tol * bscale) {
      sol.status = LpStatus::kInfeasible;
      break;
    }
  }
  return sol;
}

namespace {

LpSolution solve_full_rank(const LpProblem& p, const SimplexOptions& o, double perturbation) {
  Tableau t(p, perturbation);
  const int m = t.m();
  const int n = t.n();
  LpSolution sol;

  // Phase 1: minimize the sum of artificials.
  std::vector<double> costs(static_cast<std::size_t>(n + m), 0.0);
  std::fill(costs.begin() + n, costs.end(), 1.0);
  const LpStatus s1 = iterate(t, n + m, costs, o, sol.iterations);
  sol.phase1_iterations = sol.iterations;
  if (s1 == LpStatus::kIterationLimit) {
    sol.status = s1;
    return sol;
  }
  double bscale = 1.0;
  for (double v : p.b) bscale = std::max(bscale, std::fabs(v));
  if (-t.cost()[t.rhs()] > o.feasibility_tol * bscale) {
    sol.status = LpStatus::kInfeasible;
    return sol;
  }
  // Drive artificials out of the basis on their largest structural entry.
  // Rows whose entries are all at roundoff level are redundant and keep
  // their (zero-valued) artificial.
  for (int i = 0; i < m; ++i) {
    if (t.basis()[i] < n) continue;
    auto ri = t.row(i);
    int col = -1;
    double best = 0.0;
    for (int j = 0; j < n; ++j) {
      if (std::find(t.basis().begin(), t.basis().end(), j) != t.basis().end()) continue;
      if (std::fabs(ri[j]) > best) {
        best = std::fabs(ri[j]);
        col = j;
      }
    }
    if (col >= 0 && best > 1e3 * o.pivot_tol) {
      t.pivot(i, col);
    } else {
      ++sol.redundant_rows;
    }
  }

  // Phase 2: structural costs; artificials cost nothing and never re-enter.
  std::fill(costs.begin(), costs.end(), 0.0);
  std::copy(p.c.begin(), p.c.end(), costs.begin());
  const LpStatus s2 = iterate(t, n, costs, o, sol.iterations);
  sol.status = s2;
  if (s2 == LpStatus::kOptimal && perturbation > 0.0) {
    // Reduced costs do not depend on b, so the basis stays optimal for the
    // exact problem as long as it stays primal feasible.
    t.restore_rhs();
    t.reinvert(costs, o.feasibility_tol * bscale);
    if (t.min_rhs() < 0.0) {
      LpSolution exact = solve_full_rank(p, o, 0.0);
      exact.iterations += sol.iterations;
      exact.phase1_iterations += sol.phase1_iterations;
      return exact;
    }
  }
  sol.x.assign(n, 0.0);
  for (int i = 0; i < m; ++i) {
    const int bi = t.basis()[i];
    if (bi < n) sol.x[bi] = t.row(i)[t.rhs()];
  }
  double obj = 0.0;
  for (int j = 0; j < n; ++j) obj += p.c[j] * sol.x[j];
  sol.objective = obj;
  return sol;
}

}  // namespace

}  // namespace subkam
