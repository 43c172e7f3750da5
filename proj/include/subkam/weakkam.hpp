#pragma once

#include <optional>
#include <string>
#include <vector>

#include "subkam/action.hpp"
#include "subkam/hjsolver.hpp"
#include "subkam/measures.hpp"

namespace subkam {

enum class EstimateMethod { kTimeAverage, kAbel, kClosedMeasureLp, kOracle };
const char* to_string(EstimateMethod m) noexcept;

struct LadderEntry {
  double parameter = 0.0;
  double estimate = 0.0;
  std::optional<double> cross_check;  ///< direct-optimizer value where available
};

struct CriticalEstimate {
  EstimateMethod method = EstimateMethod::kOracle;
  double value = 0.0;
  std::vector<LadderEntry> ladder;
  double error_proxy = 0.0;
  bool flagged = false;                ///< non-monotone ladder: value is the last entry
  std::optional<double> dual_bound;    ///< LP only
  std::optional<double> lp_residual;   ///< LP only
  bool lp_boundary_flag = false;
};

/// Grid and scheme for the HJ-based estimators.
struct HjConfig {
  GridGeometry grid;
  SchemeSettings scheme;
  bool cross_check = false;  ///< also run value_free at x (time average only)
  OptimizerSettings optimizer;
};

/// Least-squares fit of e = c + a s over (s, e) pairs; returns c.
double extrapolate_linear(const std::vector<double>& s, const std::vector<double>& e);

/// V_T(x)/T over an increasing horizon ladder, extrapolated as c + a/T over the last three entries.
CriticalEstimate critical_time_average(const Lagrangian& L, const ControlSystem& sys, const Vec& x,
                                       const std::vector<double>& T_ladder, const HjConfig& cfg);
/// lambda v_lambda(x) over a decreasing ladder, extrapolated as c + a lambda.
CriticalEstimate critical_abel(const Lagrangian& L, const ControlSystem& sys, const Vec& x,
                               const std::vector<double>& lambda_ladder, const HjConfig& cfg);

struct LpRefinement {
  int n_x = 21;
  int n_u = 21;
  int degree = 4;
};

struct LpEstimateConfig {
  double R = 2.0;
  double U = 0.0;  ///< 0 selects the default bound
  std::vector<LpRefinement> ladder{{21, 21, 4}, {41, 41, 4}, {81, 41, 4}};
  bool with_dual_bound = true;
  DualBoundConfig dual;
};

CriticalEstimate critical_lp(const Lagrangian& L, const ControlSystem& sys, const LpEstimateConfig& cfg,
                             LpCriticalResult* last = nullptr);

CriticalEstimate critical_oracle(const Lagrangian& L, double search_radius = 3.0, int grid_n = 61);

struct BarrierSettings {
  double t_min = 5.0;
  double t_max = 80.0;
  int n_horizons = 12;
  /// Used for every horizon; max_dt > 0 keeps dt bounded on long horizons.
  OptimizerSettings optimizer;
  /// Restarts after the first horizon (later horizons are warm-started).
  int tail_restarts = 0;

  void validate() const;
  std::vector<double> horizons() const;
};

struct BarrierValue {
  Vec x, y;
  std::vector<double> horizons;
  std::vector<double> values;  ///< A_t(x,y) - c t, feasible horizons only
  double h = 0.0;              ///< min over the top half of the window
  double tail_slope = 0.0;     ///< least-squares slope over the last quarter
  int dropped = 0;             ///< infeasible horizons
};

/// Windowed liminf of A_t(x,y) - c t. Each horizon is warm-started from the
/// previous minimizer with a rest segment inserted where it passes closest to x*.
BarrierValue peierls_barrier(const Lagrangian& L, const ControlSystem& sys, const Vec& x, const Vec& y, double c,
                             const BarrierSettings& s);

struct AubryReport {
  std::vector<Vec> points;
  std::vector<double> h_diag;  ///< h(x,x) per point
  double eps_A = 0.0;
  std::vector<std::size_t> members;  ///< indices into points
  std::size_t x_star_index = 0;
};

/// Members are probes with h(x,x) <= eps_A. x* is added as the first probe when
/// absent. eps_A <= 0 selects 3 h(x*,x*) + 1e-2.
AubryReport aubry_detect(const Lagrangian& L, const ControlSystem& sys, double c, std::vector<Vec> probes,
                         const BarrierSettings& s, double eps_A = 0.0);

/// Evenly spaced probes with spacing about `spacing` on [-R, R]^d, masked to the ball.
std::vector<Vec> probe_lattice(int d, double R, double spacing);

struct HorizontalGradient {
  Vec q;
  double two_scale = 0.0;  ///< |q_h - q_{h/2}| / max(|q_h|, |q_{h/2}|, floor)
  bool differentiable = true;
};

/// q_i = [psi(x + h F e_i) - psi(x - h F e_i)] / 2h; h_fd <= 0 selects half a cell.
HorizontalGradient horizontal_gradient(const GridFunction& psi, const ControlSystem& sys, const Vec& x,
                                       double h_fd = 0.0);

struct CalibrationReport {
  TrajectoryControlPair pair;     ///< on [-horizon, horizon]
  std::vector<Vec> horizontal_gradients;
  std::vector<Vec> lagrangian_gradients;  ///< D_u L along the pair
  double defect = 0.0;            ///< max over subintervals
  double defect_per_unit_time = 0.0;  ///< max over subintervals of length <= 1
  double gradient_identity_residual = 0.0;
  bool truncated = false;         ///< left the interior of the grid box
  double dt = 0.0;                ///< step actually used, after refinement
};

/// Feedback u = D_p L*(x, D_F chi(x)) forward on [0, horizon] and, by
/// reversibility, backward on [-horizon, 0]. dt is refined until no step
/// moves more than one cell.
CalibrationReport calibrated_curve(const GridFunction& chi, const Lagrangian& L, const ControlSystem& sys,
                                   const Vec& x, double c, double horizon, double dt);

/// Cross-check mode: walks the Lax-Oleinik argmin table backward from x. Each
/// step reads the minimizing control at the nearest node (ties go to the lowest
/// control index) and backsteps x - dt F(x) u without snapping. Returned in forward time on [-horizon, 0]; stops
/// early before leaving the 2-cell interior.
TrajectoryControlPair argmin_backtrack(const GridFunction& chi, const Lagrangian& L, const ControlSystem& sys,
                                       const Vec& x, double horizon, const SchemeSettings& s);

/// max over the time nodes of a of |a(t) - b(t)|, b linearly interpolated and
/// restricted to the common time span.
double curve_distance(const TrajectoryControlPair& a, const TrajectoryControlPair& b);

struct SuperdifferentialReport {
  std::vector<double> residuals;  ///< |c + L*(x, D_F chi(x))|
  double max_residual = 0.0;
};

SuperdifferentialReport superdifferential_equation_check(const GridFunction& chi, const Lagrangian& L,
                                                         const ControlSystem& sys, double c,
                                                         const std::vector<Vec>& points);

}  // namespace subkam
