#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "subkam/lagrangian.hpp"
#include "subkam/simplex.hpp"
#include "subkam/systems.hpp"

namespace subkam {

/// State nodes: uniform n_x per axis over [-R, R]^d masked to the closed ball
/// B_R. Control nodes: uniform n_u per axis over [-U, U]^m.
class MeasureGrid {
 public:
  MeasureGrid(int d, int m, double R, int n_x, double U, int n_u);

  int d() const { return d_; }
  int m() const { return m_; }
  double R() const { return R_; }
  double U() const { return U_; }
  int n_x() const { return n_x_; }
  int n_u() const { return n_u_; }
  double state_spacing() const { return hx_; }
  const std::vector<Vec>& state_nodes() const { return states_; }
  const std::vector<Vec>& control_nodes() const { return controls_; }
  std::size_t size() const { return states_.size() * controls_.size(); }

  /// Nearest masked state node. Throws kSupportViolation outside B_R.
  std::size_t nearest_state(const Vec& x) const;
  /// Nearest control node (clamped to the box).
  std::size_t nearest_control(const Vec& u) const;
  /// Nodes within one cell of the sphere |x| = R.
  bool is_boundary_state(std::size_t s) const;

 private:
  int d_, m_;
  double R_, U_;
  int n_x_, n_u_;
  double hx_, hu_;
  std::vector<Vec> states_;
  std::vector<Vec> controls_;
  std::vector<long> lookup_;  // full box index -> masked index or -1
};

/// Nonnegative weights on (state node, control node) pairs, index s * n_controls + c.
class DiscreteMeasure {
 public:
  DiscreteMeasure(std::shared_ptr<const MeasureGrid> grid, std::vector<double> weights);

  const MeasureGrid& grid() const { return *grid_; }
  std::shared_ptr<const MeasureGrid> grid_ptr() const { return grid_; }
  const std::vector<Vec>& state_nodes() const { return grid_->state_nodes(); }
  const std::vector<Vec>& control_nodes() const { return grid_->control_nodes(); }
  const std::vector<double>& weights() const { return weights_; }
  double weight(std::size_t s, std::size_t c) const { return weights_[s * grid_->control_nodes().size() + c]; }
  double total_mass() const;

  /// int L dmu
  double integrate(const Lagrangian& L) const;
  /// Mass on boundary state cells.
  double boundary_mass() const;

 private:
  std::shared_ptr<const MeasureGrid> grid_;
  std::vector<double> weights_;
};

/// Test functions for the closedness constraints.
class TestFunctionBasis {
 public:
  enum class Kind { kMonomials, kHatFunctions, kConstant };

  /// All x^alpha with 1 <= |alpha| <= degree (constants excluded).
  static TestFunctionBasis monomials(int d, int degree);
  /// Tensor-product hats on `resolution` nodes per axis over [-R, R]^d.
  static TestFunctionBasis hat_functions(int d, double R, int resolution);
  /// The single constant function (zero gradient).
  static TestFunctionBasis constant(int d);

  Kind kind() const { return kind_; }
  int d() const { return d_; }
  std::size_t size() const;
  double value(std::size_t k, const Vec& x) const;
  Vec gradient(std::size_t k, const Vec& x) const;
  /// First `count` elements (monomials are ordered by degree).
  TestFunctionBasis prefix(std::size_t count) const;

 private:
  Kind kind_ = Kind::kConstant;
  int d_ = 1;
  std::vector<std::vector<int>> exps_;  // monomials
  double R_ = 1.0;
  int res_ = 0;
  std::vector<std::vector<int>> hat_nodes_;
};

/// Time-average of the pair: each step adds dt/T at its nearest (state, control) node.
DiscreteMeasure occupation_measure(const TrajectoryControlPair& pair, std::shared_ptr<const MeasureGrid> grid);

/// max_k |sum w <F*(x) D phi_k(x), u>| / max_k sup_x |D phi_k(x)| (sup over the grid's state nodes).
double closedness_residual(const DiscreteMeasure& mu, const ControlSystem& sys, const TestFunctionBasis& basis);

struct LpCriticalConfig {
  double R = 2.0;
  double U = 0.0;  ///< 0 selects 4 (1 + R) ell_1
  int n_x = 41;
  int n_u = 21;
  SimplexOptions simplex;
};

struct LpCriticalResult {
  double c_lp = 0.0;
  std::shared_ptr<const DiscreteMeasure> mu_star;
  long iterations = 0;
  std::size_t n_variables = 0;
  std::size_t basis_size = 0;
  int redundant_rows = 0;
  double residual = 0.0;       ///< closedness_residual of mu_star
  double boundary_mass = 0.0;
  bool boundary_flag = false;  ///< mass >= 1e-6 on boundary cells: R likely too small
};

/// Minimizes int L dmu over probability measures on the grid that satisfy the
/// closedness constraint for every basis element.
LpCriticalResult lp_critical(const Lagrangian& L, const ControlSystem& sys, const LpCriticalConfig& config,
                             const TestFunctionBasis& basis);

struct DualBoundConfig {
  double R = 2.0;
  int sample_n = 41;       ///< per axis over [-R,R]^d, masked to B_R
  int degree = 4;
  int max_sweeps = 40;
  double initial_step = 0.5;
  double min_step = 1e-4;
};

struct DualBoundResult {
  double bound = 0.0;            ///< best -max_x H(x, D psi(x)) found
  double bound_at_initial = 0.0;
  std::vector<double> psi_params;
  int evaluations = 0;
};

/// -max_{x in samples} H(x, D psi(x)) for the polynomial psi with the given
/// monomial coefficients (basis TestFunctionBasis::monomials(d, degree)).
double dual_objective(const Lagrangian& L, const ControlSystem& sys, const std::vector<double>& psi_params,
                      const TestFunctionBasis& basis, const std::vector<Vec>& samples);

/// Starts from psi_params (zero if empty) and tightens by coordinate search.
DualBoundResult dual_bound(const Lagrangian& L, const ControlSystem& sys, std::vector<double> psi_params,
                           const DualBoundConfig& config);

}  // namespace subkam
