#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "subkam/core.hpp"

namespace subkam {

/// Driftless control-affine system x' = F(x) u with F(x) = [f_1 | ... | f_m].
///
/// Field and Jacobian callbacks are pure; a ControlSystem is immutable once
/// built and can be shared across threads.
class ControlSystem {
 public:
  using FieldFn = std::function<Mat(const Vec&)>;
  /// Returns J with J = sum_i u_i * d f_i / dx (a d x d matrix).
  using VelocityJacobianFn = std::function<Mat(const Vec&, const Vec&)>;

  struct Metadata {
    std::string name;
    int d = 0;
    int m = 0;
    double growth_constant = 1.0;  ///< c_f in |f_i(x)| <= c_f (1 + |x|)
    bool rank_ok_everywhere = true;
    bool satisfies_S = false;
    bool experimental = false;
  };

  ControlSystem(Metadata meta, FieldFn fields, VelocityJacobianFn velocity_jacobian);

  const std::string& name() const { return meta_.name; }
  int d() const { return meta_.d; }
  int m() const { return meta_.m; }
  double growth_constant() const { return meta_.growth_constant; }
  bool rank_ok_everywhere() const { return meta_.rank_ok_everywhere; }
  bool satisfies_S() const { return meta_.satisfies_S; }
  bool experimental() const { return meta_.experimental; }
  const Metadata& metadata() const { return meta_; }

  /// F(x) as a d x m matrix. Throws kInvalidSystem on non-finite input or output.
  Mat eval_fields(const Vec& x) const;
  /// F(x) u without the finiteness checks (hot path).
  Vec velocity(const Vec& x, const Vec& u) const { return fields_(x) * u; }
  /// F(x) without the finiteness checks (hot path).
  Mat fields_at(const Vec& x) const { return fields_(x); }
  Mat velocity_jacobian(const Vec& x, const Vec& u) const { return jac_(x, u); }

 private:
  Metadata meta_;
  FieldFn fields_;
  VelocityJacobianFn jac_;
};

/// F = identity, m = d.
ControlSystem euclidean(int d);
/// f_1 = (1, 0, -y/2), f_2 = (0, 1, x/2).
ControlSystem heisenberg();
/// f_1 = (1, 0), f_2 = (0, x). Loses rank on {x = 0}; flagged experimental.
ControlSystem grushin();

/// f_i(x) = A_i x + b_i.
struct AffineField {
  Mat A;
  Vec b;
};
ControlSystem affine_system(std::string name, std::vector<AffineField> fields, double growth_constant,
                            bool rank_ok_everywhere = true, bool satisfies_S = false);

struct TimeGrid {
  double t0 = 0.0;
  double t1 = 1.0;
  int n_steps = 1;

  double dt() const { return (t1 - t0) / n_steps; }
  double duration() const { return t1 - t0; }
  double time(int k) const { return t0 + k * dt(); }
  int node_count() const { return n_steps + 1; }
};

TimeGrid make_time_grid(double t0, double t1, int n_steps);

/// Discretized (gamma, u): n_steps + 1 states, n_steps piecewise-constant controls.
struct TrajectoryControlPair {
  TimeGrid grid;
  std::vector<Vec> states;
  std::vector<Vec> controls;
  std::optional<double> action;

  double energy() const;
  double duration() const { return grid.duration(); }
};

/// |gamma| beyond this triggers kBlowUp in integrate().
inline constexpr double kBlowUpNorm = 1e6;

/// One classical RK4 step with the control held constant.
Vec rk4_step(const ControlSystem& sys, const Vec& x, const Vec& u, double dt);

/// RK4 step with the Jacobians of the step map w.r.t. x (d x d) and u (d x m).
struct StepJacobians {
  Vec next;
  Mat dx;
  Mat du;
};
StepJacobians rk4_step_with_jacobians(const ControlSystem& sys, const Vec& x, const Vec& u, double dt);

TrajectoryControlPair integrate(const ControlSystem& sys, const Vec& x0, const std::vector<Vec>& controls,
                                const TimeGrid& grid);

struct FieldDiagnostics {
  int n_samples = 0;
  double max_growth_ratio = 0.0;        ///< max over samples and i of |f_i(x)| / (1 + |x|)
  double min_singular_value = 0.0;      ///< smallest sigma_min(F(x)) seen
  int rank_deficient_samples = 0;       ///< samples with sigma_min <= 1e-10 sigma_max
  Vec worst_rank_point;
  bool growth_violation = false;        ///< max_growth_ratio > c_f
  bool rank_violation = false;          ///< rank deficiency found although F2 was claimed
  bool rank_deficiency_found = false;
};

/// Samples the box [-r, r]^d (the center is always included) and measures
/// the growth bound and the rank of F(x). Report-only.
FieldDiagnostics check_f1_f2(const ControlSystem& sys, double sample_box_radius, int n_samples, std::uint64_t seed);

inline constexpr double kRankThreshold = 1e-10;

}  // namespace subkam
