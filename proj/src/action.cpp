#include "subkam/action.hpp"

#include <ceres/ceres.h>
#include <glog/logging.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "subkam/parallel.hpp"

namespace subkam {

void OptimizerSettings::validate() const {
  if (n_steps <= 0 || n_restarts < 0 || !(penalty_init > 0.0) || !(penalty_growth > 1.0) || max_outer <= 0 ||
      !(grad_tol > 0.0) || max_iterations <= 0 || !(feasibility_tol > 0.0) || max_dt < 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "optimizer settings: values must be positive and penalty_growth > 1");
  }
}

int OptimizerSettings::steps_for(double horizon) const {
  if (max_dt > 0.0) return std::max(n_steps, static_cast<int>(std::ceil(horizon / max_dt - 1e-9)));
  return n_steps;
}

double action_of(const Lagrangian& L, TrajectoryControlPair& pair) {
  const double dt = pair.grid.dt();
  double sum = 0.0;
  for (std::size_t k = 0; k < pair.controls.size(); ++k) {
    const double l = L.value(pair.states[k], pair.controls[k]);
    if (!std::isfinite(l)) throw Error(ErrorKind::kEvaluation, "action_of: non-finite Lagrangian value");
    sum += l * dt;
  }
  pair.action = sum;
  return sum;
}

bool TranscribedObjective::evaluate(const double* controls, double* value, double* grad) const {
  const int d = sys.d();
  const int m = sys.m();
  std::vector<StepJacobians> steps;
  if (grad != nullptr) steps.reserve(n_steps);
  Vec x = x0;
  std::vector<Vec> xs;
  xs.reserve(n_steps + 1);
  xs.push_back(x);
  double j = 0.0;
  for (int k = 0; k < n_steps; ++k) {
    const Vec u = Eigen::Map<const Eigen::VectorXd>(controls + k * m, m);
    j += dt * L.value(x, u);
    if (grad != nullptr) {
      steps.push_back(rk4_step_with_jacobians(sys, x, u, dt));
      x = steps.back().next;
    } else {
      x = rk4_step(sys, x, u, dt);
    }
    if (!x.allFinite() || x.norm() > kBlowUpNorm) return false;
    xs.push_back(x);
  }
  Vec lambda = Vec::Zero(d);
  if (target) {
    const Vec gap = x - *target;
    j += rho * gap.squaredNorm();
    lambda = 2.0 * rho * gap;
  }
  if (!std::isfinite(j)) return false;
  *value = j;
  if (grad == nullptr) return true;
  for (int k = n_steps - 1; k >= 0; --k) {
    const Vec u = Eigen::Map<const Eigen::VectorXd>(controls + k * m, m);
    const Vec gu = dt * L.grad_u(xs[k], u) + steps[k].du.transpose() * lambda;
    for (int i = 0; i < m; ++i) grad[k * m + i] = gu(i);
    lambda = dt * L.grad_x(xs[k], u) + steps[k].dx.transpose() * lambda;
  }
  return true;
}

namespace {

class CeresObjective final : public ceres::FirstOrderFunction {
 public:
  explicit CeresObjective(const TranscribedObjective& obj) : obj_(obj) {}
  bool Evaluate(const double* parameters, double* cost, double* gradient) const override {
    return obj_.evaluate(parameters, cost, gradient);
  }
  int NumParameters() const override { return obj_.n_steps * obj_.sys.m(); }

 private:
  const TranscribedObjective& obj_;
};

void run_lbfgs(const TranscribedObjective& obj, std::vector<double>& u, const OptimizerSettings& s) {
  static const bool quiet = [] {
    FLAGS_minloglevel = google::GLOG_ERROR;
    return true;
  }();
  (void)quiet;
  ceres::GradientProblemSolver::Options opts;
  opts.line_search_direction_type = ceres::LBFGS;
  opts.max_num_iterations = s.max_iterations;
  opts.gradient_tolerance = s.grad_tol;
  opts.function_tolerance = 1e-15;
  opts.parameter_tolerance = 1e-14;
  opts.logging_type = ceres::SILENT;
  opts.minimizer_progress_to_stdout = false;
  ceres::GradientProblem problem(new CeresObjective(obj));
  ceres::GradientProblemSolver::Summary summary;
  ceres::Solve(opts, problem, u.data(), &summary);
}

std::vector<Vec> unflatten(const std::vector<double>& u, int m) {
  std::vector<Vec> out(u.size() / m);
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = Eigen::Map<const Eigen::VectorXd>(u.data() + k * m, m);
  }
  return out;
}

std::vector<double> flatten(const std::vector<Vec>& controls) {
  std::vector<double> u;
  for (const auto& c : controls) u.insert(u.end(), c.data(), c.data() + c.size());
  return u;
}

struct StartOutcome {
  std::vector<double> controls;
  double gap = std::numeric_limits<double>::infinity();
  double value = std::numeric_limits<double>::infinity();
  bool feasible = false;
  bool valid = false;
};

std::vector<std::vector<double>> initial_guesses(int n_steps, int m, double t, const OptimizerSettings& s,
                                                 const std::vector<Vec>* warm_start) {
  std::vector<std::vector<double>> starts;
  if (warm_start != nullptr && static_cast<int>(warm_start->size()) == n_steps) starts.push_back(flatten(*warm_start));
  starts.emplace_back(static_cast<std::size_t>(n_steps * m), 0.0);
  const double scale = 1.0 / std::sqrt(t);
  for (int r = 0; r < s.n_restarts; ++r) {
    std::seed_seq seq{static_cast<std::uint32_t>(s.seed & 0xffffffffu), static_cast<std::uint32_t>(s.seed >> 32),
                      static_cast<std::uint32_t>(r)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<double> u(static_cast<std::size_t>(n_steps * m));
    for (auto& v : u) v = scale * unit(rng);
    starts.push_back(std::move(u));
  }
  return starts;
}

double running_cost(const Lagrangian& L, const ControlSystem& sys, const Vec& x, const std::vector<double>& u,
                    double dt, int n_steps) {
  TranscribedObjective plain{L, sys, x, std::nullopt, 0.0, dt, n_steps};
  double v = 0.0;
  if (!plain.evaluate(u.data(), &v, nullptr)) return std::numeric_limits<double>::infinity();
  return v;
}

ActionResult finish(const Lagrangian& L, const ControlSystem& sys, const Vec& x, const StartOutcome& best,
                    double t, int n_steps, int index) {
  ActionResult res;
  res.pair = integrate(sys, x, unflatten(best.controls, sys.m()), make_time_grid(0.0, t, n_steps));
  res.value = action_of(L, res.pair);
  res.endpoint_gap = std::isfinite(best.gap) ? best.gap : 0.0;
  res.converged = best.feasible;
  res.restart_index = index;
  return res;
}

}  // namespace

ActionResult minimize_action_fixed(const Lagrangian& L, const ControlSystem& sys, const Vec& x, const Vec& y, double t,
                                   const OptimizerSettings& settings, const std::vector<Vec>* warm_start) {
  settings.validate();
  if (!(t > 0.0)) throw Error(ErrorKind::kInvalidArgument, "minimize_action_fixed: horizon must be positive");
  if (x.size() != sys.d() || y.size() != sys.d()) {
    throw Error(ErrorKind::kInvalidArgument, "minimize_action_fixed: endpoint dimension mismatch");
  }
  const int m = sys.m();
  const int n = settings.steps_for(t);
  const double dt = t / n;
  const double tol = settings.feasibility_tol * (1.0 + y.norm());
  auto starts = initial_guesses(n, m, t, settings, warm_start);
  std::vector<StartOutcome> outcomes(starts.size());
  // Warm and zero starts come first; only the random ones get re-perturbed.
  const std::size_t first_random = starts.size() - static_cast<std::size_t>(settings.n_restarts);

  parallel_for(starts.size(), [&](std::size_t i) {
    const std::vector<double> kick = i >= first_random ? starts[i] : std::vector<double>{};
    std::vector<double> u = std::move(starts[i]);
    TranscribedObjective obj{L, sys, x, y, settings.penalty_init, dt, n};
    StartOutcome out;
    double probe = 0.0;
    if (!obj.evaluate(u.data(), &probe, nullptr)) {
      outcomes[i] = out;
      return;
    }
    double previous_gap = std::numeric_limits<double>::infinity();
    for (int outer = 0; outer < settings.max_outer; ++outer) {
      run_lbfgs(obj, u, settings);
      const auto traj = integrate(sys, x, unflatten(u, m), make_time_grid(0.0, t, n));
      out.gap = (traj.states.back() - y).norm();
      if (out.gap <= tol) {
        out.feasible = true;
        break;
      }
      // A weak penalty can pull the controls onto a stationary point of the
      // endpoint map (u = 0 for vertical Heisenberg targets); re-perturb.
      if (!kick.empty() && out.gap > 0.99 * previous_gap)
        for (std::size_t k = 0; k < u.size(); ++k) u[k] += kick[k];
      previous_gap = out.gap;
      obj.rho *= settings.penalty_growth;
    }
    out.value = running_cost(L, sys, x, u, dt, n);
    out.valid = std::isfinite(out.value);
    out.controls = std::move(u);
    outcomes[i] = std::move(out);
  });

  int best = -1;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    if (o.valid) best_gap = std::min(best_gap, o.gap);
    if (!o.valid || !o.feasible) continue;
    if (best < 0 || o.value < outcomes[best].value) best = static_cast<int>(i);
  }
  if (best < 0) {
    throw Error(ErrorKind::kInfeasibleEndpoint,
                "minimize_action_fixed: no start reached the endpoint (best gap " + std::to_string(best_gap) + ")",
                best_gap);
  }
  return finish(L, sys, x, outcomes[best], t, n, best);
}

ActionResult value_free(const Lagrangian& L, const ControlSystem& sys, const Vec& x, double T,
                        const OptimizerSettings& settings, const std::vector<Vec>* warm_start) {
  settings.validate();
  if (!(T > 0.0)) throw Error(ErrorKind::kInvalidArgument, "value_free: horizon must be positive");
  const int m = sys.m();
  const int n = settings.steps_for(T);
  const double dt = T / n;
  auto starts = initial_guesses(n, m, T, settings, warm_start);
  std::vector<StartOutcome> outcomes(starts.size());
  parallel_for(starts.size(), [&](std::size_t i) {
    std::vector<double> u = std::move(starts[i]);
    TranscribedObjective obj{L, sys, x, std::nullopt, 0.0, dt, n};
    StartOutcome out;
    double probe = 0.0;
    if (obj.evaluate(u.data(), &probe, nullptr)) {
      run_lbfgs(obj, u, settings);
      out.value = running_cost(L, sys, x, u, dt, n);
      out.valid = std::isfinite(out.value);
      out.feasible = out.valid;
      out.gap = 0.0;
      out.controls = std::move(u);
    }
    outcomes[i] = std::move(out);
  });
  int best = -1;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i].valid) continue;
    if (best < 0 || outcomes[i].value < outcomes[best].value) best = static_cast<int>(i);
  }
  if (best < 0) throw Error(ErrorKind::kEvaluation, "value_free: every start failed to evaluate");
  return finish(L, sys, x, outcomes[best], T, n, best);
}

double sr_distance(const ControlSystem& sys, const Vec& x, const Vec& y, const OptimizerSettings& settings) {
  if ((x - y).norm() == 0.0) return 0.0;
  const Lagrangian energy = energy_lagrangian(sys.d(), sys.m());
  try {
    const auto res = minimize_action_fixed(energy, sys, x, y, 1.0, settings);
    return std::sqrt(2.0 * res.value);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kInfeasibleEndpoint) {
      throw Error(ErrorKind::kInfeasibleEndpoint, "sr_distance: target unreachable within the optimizer budget",
                  e.detail());
    }
    throw;
  }
}

TrajectoryControlPair geodesic_pair(const ControlSystem& sys, const Vec& x, const Vec& y,
                                    const OptimizerSettings& settings) {
  if ((x - y).norm() == 0.0) {
    TrajectoryControlPair empty;
    empty.grid = TimeGrid{0.0, 0.0, 0};
    empty.states = {x};
    empty.action = 0.0;
    return empty;
  }
  const Lagrangian energy = energy_lagrangian(sys.d(), sys.m());
  const auto res = minimize_action_fixed(energy, sys, x, y, 1.0, settings);
  const double dist = std::sqrt(2.0 * res.value);
  // Time s -> s * dist with control u / dist traces the same path, also for
  // the discrete RK4 map (F(x) u dt is unchanged).
  TrajectoryControlPair out;
  out.grid = make_time_grid(0.0, dist, res.pair.grid.n_steps);
  out.states = res.pair.states;
  out.controls.reserve(res.pair.controls.size());
  for (const auto& u : res.pair.controls) out.controls.push_back(u / dist);
  return out;
}

}  // namespace subkam
