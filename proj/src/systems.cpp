#include "subkam/systems.hpp"

#include <random>
#include <utility>

namespace subkam {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInvalidSystem: return "invalid-system";
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kBlowUp: return "blow-up";
    case ErrorKind::kEvaluation: return "evaluation";
    case ErrorKind::kConvexityViolation: return "convexity-violation";
    case ErrorKind::kInfeasibleEndpoint: return "infeasible-endpoint";
    case ErrorKind::kSupportViolation: return "support-violation";
    case ErrorKind::kLpInternal: return "lp-internal";
    case ErrorKind::kNonConverged: return "non-converged";
    case ErrorKind::kOutOfBox: return "out-of-box";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

ControlSystem::ControlSystem(Metadata meta, FieldFn fields, VelocityJacobianFn velocity_jacobian)
    : meta_(std::move(meta)), fields_(std::move(fields)), jac_(std::move(velocity_jacobian)) {
  if (meta_.d <= 0 || meta_.m <= 0 || meta_.m > meta_.d || meta_.d > kMaxDim) {
    throw Error(ErrorKind::kInvalidSystem, "system '" + meta_.name + "': need 0 < m <= d <= " +
                                               std::to_string(kMaxDim));
  }
  if (!(meta_.growth_constant > 0.0)) {
    throw Error(ErrorKind::kInvalidSystem, "system '" + meta_.name + "': growth constant must be positive");
  }
}

Mat ControlSystem::eval_fields(const Vec& x) const {
  if (x.size() != meta_.d || !x.allFinite()) {
    throw Error(ErrorKind::kInvalidSystem, "eval_fields: point must be finite with dimension " +
                                               std::to_string(meta_.d));
  }
  Mat f = fields_(x);
  if (f.rows() != meta_.d || f.cols() != meta_.m || !f.allFinite()) {
    throw Error(ErrorKind::kInvalidSystem, "eval_fields: system '" + meta_.name + "' produced an invalid matrix");
  }
  return f;
}

ControlSystem euclidean(int d) {
  ControlSystem::Metadata meta{"euclidean-" + std::to_string(d), d, d, 1.0, true, true, false};
  return ControlSystem(
      meta, [d](const Vec&) -> Mat { return Mat::Identity(d, d); },
      [d](const Vec&, const Vec&) -> Mat { return Mat::Zero(d, d); });
}

ControlSystem heisenberg() {
  ControlSystem::Metadata meta{"heisenberg", 3, 2, 1.0, true, true, false};
  return ControlSystem(
      meta,
      [](const Vec& x) -> Mat {
        Mat f(3, 2);
        f << 1.0, 0.0,  //
            0.0, 1.0,   //
            -0.5 * x(1), 0.5 * x(0);
        return f;
      },
      [](const Vec&, const Vec& u) -> Mat {
        // d/dx [u1 f1 + u2 f2] only has the third row: (u2/2, -u1/2, 0).
        Mat j = Mat::Zero(3, 3);
        j(2, 0) = 0.5 * u(1);
        j(2, 1) = -0.5 * u(0);
        return j;
      });
}

ControlSystem grushin() {
  ControlSystem::Metadata meta{"grushin", 2, 2, 1.0, false, true, true};
  return ControlSystem(
      meta,
      [](const Vec& x) -> Mat {
        Mat f(2, 2);
        f << 1.0, 0.0,  //
            0.0, x(0);
        return f;
      },
      [](const Vec&, const Vec& u) -> Mat {
        Mat j = Mat::Zero(2, 2);
        j(1, 0) = u(1);
        return j;
      });
}

ControlSystem affine_system(std::string name, std::vector<AffineField> fields, double growth_constant,
                            bool rank_ok_everywhere, bool satisfies_S) {
  if (fields.empty()) throw Error(ErrorKind::kInvalidSystem, "affine system needs at least one field");
  const int d = static_cast<int>(fields.front().b.size());
  for (const auto& f : fields) {
    if (f.A.rows() != d || f.A.cols() != d || f.b.size() != d || !f.A.allFinite() || !f.b.allFinite()) {
      throw Error(ErrorKind::kInvalidSystem, "affine system '" + name + "': inconsistent field dimensions");
    }
  }
  const int m = static_cast<int>(fields.size());
  ControlSystem::Metadata meta{std::move(name), d, m, growth_constant, rank_ok_everywhere, satisfies_S, false};
  return ControlSystem(
      meta,
      [fields, d, m](const Vec& x) -> Mat {
        Mat f(d, m);
        for (int i = 0; i < m; ++i) f.col(i) = fields[i].A * x + fields[i].b;
        return f;
      },
      [fields, d, m](const Vec&, const Vec& u) -> Mat {
        Mat j = Mat::Zero(d, d);
        for (int i = 0; i < m; ++i) j += u(i) * fields[i].A;
        return j;
      });
}

TimeGrid make_time_grid(double t0, double t1, int n_steps) {
  if (!(t1 > t0) || n_steps <= 0) {
    throw Error(ErrorKind::kInvalidArgument, "time grid needs t1 > t0 and n_steps > 0");
  }
  return TimeGrid{t0, t1, n_steps};
}

double TrajectoryControlPair::energy() const {
  double e = 0.0;
  const double dt = grid.dt();
  for (const auto& u : controls) e += u.squaredNorm() * dt;
  return e;
}

Vec rk4_step(const ControlSystem& sys, const Vec& x, const Vec& u, double dt) {
  const Vec k1 = sys.velocity(x, u);
  const Vec k2 = sys.velocity(x + 0.5 * dt * k1, u);
  const Vec k3 = sys.velocity(x + 0.5 * dt * k2, u);
  const Vec k4 = sys.velocity(x + dt * k3, u);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

StepJacobians rk4_step_with_jacobians(const ControlSystem& sys, const Vec& x, const Vec& u, double dt) {
  const int d = sys.d();
  const Mat id = Mat::Identity(d, d);
  // Stage k_j = F(x_j) u with x_j = x + a_j dt k_{j-1}; forward-mode chain rule.
  const Vec k1 = sys.velocity(x, u);
  const Mat k1x = sys.velocity_jacobian(x, u);
  const Mat k1u = sys.fields_at(x);

  const Vec x2 = x + 0.5 * dt * k1;
  const Vec k2 = sys.velocity(x2, u);
  const Mat j2 = sys.velocity_jacobian(x2, u);
  const Mat k2x = j2 * (id + 0.5 * dt * k1x);
  const Mat k2u = j2 * (0.5 * dt * k1u) + sys.fields_at(x2);

  const Vec x3 = x + 0.5 * dt * k2;
  const Vec k3 = sys.velocity(x3, u);
  const Mat j3 = sys.velocity_jacobian(x3, u);
  const Mat k3x = j3 * (id + 0.5 * dt * k2x);
  const Mat k3u = j3 * (0.5 * dt * k2u) + sys.fields_at(x3);

  const Vec x4 = x + dt * k3;
  const Vec k4 = sys.velocity(x4, u);
  const Mat j4 = sys.velocity_jacobian(x4, u);
  const Mat k4x = j4 * (id + dt * k3x);
  const Mat k4u = j4 * (dt * k3u) + sys.fields_at(x4);

  StepJacobians out;
  out.next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  out.dx = id + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
  out.du = (dt / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
  return out;
}

TrajectoryControlPair integrate(const ControlSystem& sys, const Vec& x0, const std::vector<Vec>& controls,
                                const TimeGrid& grid) {
  if (static_cast<int>(controls.size()) != grid.n_steps) {
    throw Error(ErrorKind::kInvalidArgument, "integrate: expected " + std::to_string(grid.n_steps) +
                                                 " controls, got " + std::to_string(controls.size()));
  }
  if (x0.size() != sys.d() || !x0.allFinite()) {
    throw Error(ErrorKind::kInvalidArgument, "integrate: initial state must be finite with dimension d");
  }
  TrajectoryControlPair pair;
  pair.grid = grid;
  pair.controls = controls;
  pair.states.reserve(grid.n_steps + 1);
  pair.states.push_back(x0);
  const double dt = grid.dt();
  for (int k = 0; k < grid.n_steps; ++k) {
    const Vec& u = controls[k];
    if (u.size() != sys.m() || !u.allFinite()) {
      throw Error(ErrorKind::kInvalidArgument, "integrate: control " + std::to_string(k) + " is invalid");
    }
    Vec next = rk4_step(sys, pair.states.back(), u, dt);
    if (!next.allFinite() || next.norm() > kBlowUpNorm) {
      throw Error(ErrorKind::kBlowUp, "integrate: trajectory left |x| <= 1e6 at step " + std::to_string(k),
                  grid.time(k + 1));
    }
    pair.states.push_back(std::move(next));
  }
  return pair;
}

FieldDiagnostics check_f1_f2(const ControlSystem& sys, double sample_box_radius, int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw Error(ErrorKind::kInvalidArgument, "check_f1_f2: n_samples must be >= 1");
  FieldDiagnostics rep;
  rep.n_samples = n_samples;
  rep.min_singular_value = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-sample_box_radius, sample_box_radius);
  const int d = sys.d();
  for (int s = 0; s < n_samples; ++s) {
    Vec x = Vec::Zero(d);
    if (s > 0) {
      for (int i = 0; i < d; ++i) x(i) = coord(rng);
    }
    const Mat f = sys.eval_fields(x);
    for (int i = 0; i < sys.m(); ++i) {
      rep.max_growth_ratio = std::max(rep.max_growth_ratio, f.col(i).norm() / (1.0 + x.norm()));
    }
    Eigen::JacobiSVD<Mat> svd(f);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    if (smin < rep.min_singular_value) {
      rep.min_singular_value = smin;
      rep.worst_rank_point = x;
    }
    if (smin <= kRankThreshold * sv(0)) ++rep.rank_deficient_samples;
  }
  rep.growth_violation = rep.max_growth_ratio > sys.growth_constant();
  rep.rank_deficiency_found = rep.rank_deficient_samples > 0;
  rep.rank_violation = rep.rank_deficiency_found && sys.rank_ok_everywhere();
  return rep;
}

}  // namespace subkam
