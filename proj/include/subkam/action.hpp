#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "subkam/lagrangian.hpp"
#include "subkam/systems.hpp"

namespace subkam {

struct OptimizerSettings {
  int n_steps = 100;
  int n_restarts = 8;
  double penalty_init = 10.0;
  double penalty_growth = 10.0;
  int max_outer = 8;
  double grad_tol = 1e-10;
  std::uint64_t seed = 0;
  /// When > 0 the step count is raised so that dt <= max_dt (long horizons).
  double max_dt = 0.0;
  int max_iterations = 3000;
  /// Endpoint feasibility: gap <= feasibility_tol * (1 + |y|).
  double feasibility_tol = 1e-5;

  void validate() const;
  int steps_for(double horizon) const;
};

struct ActionResult {
  double value = 0.0;
  TrajectoryControlPair pair;
  double endpoint_gap = 0.0;
  bool converged = false;
  int restart_index = -1;  ///< which start produced the incumbent
};

/// sum_k L(states[k], controls[k]) dt; stored into pair.action.
double action_of(const Lagrangian& L, TrajectoryControlPair& pair);

/// Upper approximation of A_t(x,y). Controls are the decision variables, the
/// endpoint is enforced by a quadratic penalty with continuation, and the best
/// feasible start wins (warm start, zero control, then seeded random starts).
ActionResult minimize_action_fixed(const Lagrangian& L, const ControlSystem& sys, const Vec& x, const Vec& y, double t,
                                   const OptimizerSettings& settings,
                                   const std::vector<Vec>* warm_start = nullptr);

/// V_T(x) with a free endpoint.
ActionResult value_free(const Lagrangian& L, const ControlSystem& sys, const Vec& x, double T,
                        const OptimizerSettings& settings, const std::vector<Vec>* warm_start = nullptr);

/// d_SR(x,y) = sqrt(2 E) where E is the minimal energy at horizon 1.
double sr_distance(const ControlSystem& sys, const Vec& x, const Vec& y, const OptimizerSettings& settings);

/// Energy minimizer rescaled to unit speed on [0, d_SR(x,y)].
TrajectoryControlPair geodesic_pair(const ControlSystem& sys, const Vec& x, const Vec& y,
                                    const OptimizerSettings& settings);

/// Objective with adjoint gradient; exposed for tests.
/// J(u) = sum_k L(x_k,u_k) dt + rho |x_N - y|^2 (penalty term skipped without a target).
struct TranscribedObjective {
  const Lagrangian& L;
  const ControlSystem& sys;
  Vec x0;
  std::optional<Vec> target;
  double rho = 0.0;
  double dt = 0.0;
  int n_steps = 0;

  /// Returns false if the trajectory blows up. grad may be null.
  bool evaluate(const double* controls, double* value, double* grad) const;
};

}  // namespace subkam
