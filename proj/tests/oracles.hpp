#pragma once

// Independent reference computations used by the unit and acceptance suites.
// Nothing here calls into the solver paths it is used to check.

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "subkam/lagrangian.hpp"

namespace subkam::oracle {

/// sup_u {<q,u> - L(x,u)} by grid search: a coarse pass over the box of
/// radius 2 ell1 |q| + 1, then a 1e-3 grid around the coarse winner. The
/// inner problem is concave, so the fine window around the coarse maximum
/// contains the global one.
inline double grid_legendre(const Lagrangian& L, const Vec& x, const Vec& q, double fine_step = 1e-3) {
  const int m = static_cast<int>(q.size());
  const double radius = 2.0 * L.ell1() * q.norm() + 1.0;
  auto objective = [&](const Vec& u) { return q.dot(u) - L.value(x, u); };

  auto scan = [&](const Vec& center, double half, double step) {
    const int n = static_cast<int>(std::ceil(half / step));
    Vec best_u = center;
    double best = objective(center);
    std::vector<int> idx(m, -n);
    while (true) {
      Vec u(m);
      for (int i = 0; i < m; ++i) u(i) = center(i) + idx[i] * step;
      const double v = objective(u);
      if (v > best) {
        best = v;
        best_u = u;
      }
      int k = 0;
      while (k < m && ++idx[k] > n) idx[k++] = -n;
      if (k == m) break;
    }
    return std::pair{best, best_u};
  };

  if (m == 1) return scan(Vec::Zero(1), radius, fine_step).first;
  const double coarse = 0.02;
  const auto [v0, u0] = scan(Vec::Zero(m), radius, coarse);
  (void)v0;
  return scan(u0, 2.0 * coarse, fine_step).first;
}

/// Agmon distance |int_0^x sqrt(2 V(s)) ds| for V(s) = s^2/(1+s^2):
/// sqrt(2 V) = sqrt(2) |s| / sqrt(1+s^2), antiderivative sqrt(2) sqrt(1+s^2).
inline double agmon_rational_well(double x) { return std::sqrt(2.0) * (std::sqrt(1.0 + x * x) - 1.0); }

/// Same for the double well V = (x^2-1)^2 measured from the nearer well:
/// sqrt(2 V) = sqrt(2) |x^2 - 1|.
inline double agmon_double_well(double x) {
  auto prim = [](double s) { return s * s * s / 3.0 - s; };
  const double well = x < 0.0 ? -1.0 : 1.0;
  // s^2 - 1 keeps one sign between x and its nearer well.
  return std::sqrt(2.0) * std::fabs(prim(x) - prim(well));
}

/// Composite Simpson rule on [a,b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 2000) {
  if (n % 2 != 0) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// Minimal horizontal length from 0 to (0,0,z) in the Heisenberg group (Dido problem).
inline double heisenberg_vertical_distance(double z) { return 2.0 * std::sqrt(std::numbers::pi * std::fabs(z)); }


/// min c^T x s.t. A x = b, x >= 0 by enumerating every basis of a small LP.
/// Returns +inf when no basic feasible solution exists.
inline double brute_force_lp(int rows, int cols, const std::vector<double>& A, const std::vector<double>& b,
                             const std::vector<double>& c) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(rows);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == rows) {
      Eigen::MatrixXd B(rows, rows);
      Eigen::VectorXd rhs(rows);
      for (int i = 0; i < rows; ++i) {
        rhs[i] = b[i];
        for (int k = 0; k < rows; ++k) B(i, k) = A[static_cast<std::size_t>(i) * cols + pick[k]];
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
      if (lu.rank() < rows) return;
      const Eigen::VectorXd xb = lu.solve(rhs);
      if (xb.minCoeff() < -1e-12) return;
      double obj = 0.0;
      for (int k = 0; k < rows; ++k) obj += c[pick[k]] * xb[k];
      best = std::min(best, obj);
      return;
    }
    for (int j = start; j < cols; ++j) {
      pick[depth] = j;
      rec(j + 1, depth + 1);
    }
  };
  rec(0, 0);
  return best;
}

}  // namespace subkam::oracle
