#pragma once

#include <cstddef>
#include <vector>

#include "subkam/lagrangian.hpp"
#include "subkam/systems.hpp"

namespace subkam {

/// Axis-aligned node lattice: resolution[i] nodes across [center_i - half_i, center_i + half_i].
struct GridGeometry {
  Vec center;
  Vec half_widths;
  std::vector<int> resolution;

  int d() const { return static_cast<int>(resolution.size()); }
  std::size_t size() const;
  double cell(int axis) const { return 2.0 * half_widths[axis] / (resolution[axis] - 1); }
  double min_cell() const;
  void validate() const;
};

GridGeometry cube_geometry(int d, double half_width, int resolution);

/// Values at the nodes of a GridGeometry; flat index runs fastest along axis 0.
class GridFunction {
 public:
  explicit GridFunction(GridGeometry g, double fill = 0.0);

  const GridGeometry& geometry() const { return g_; }
  int d() const { return g_.d(); }
  std::size_t size() const { return values_.size(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  Vec node(std::size_t flat) const;
  std::vector<int> multi_index(std::size_t flat) const;
  std::size_t flat_index(const std::vector<int>& idx) const;
  /// Flat index of the node closest to x (clamped to the box).
  std::size_t nearest_node(const Vec& x) const;
  double cell(int axis) const { return g_.cell(axis); }

  /// Multilinear interpolation; coordinates outside the box are clamped to the edge.
  double interpolate(const Vec& x) const;
  /// Central differences at a node (one-sided on the edge).
  Vec node_gradient(std::size_t flat) const;
  bool contains(const Vec& x, double margin_cells = 0.0) const;
  /// At least `margin` cells away from every face.
  bool is_interior(std::size_t flat, int margin) const;

  double sup_abs() const;
  double sup_diff(const GridFunction& other) const;
  void add_constant(double a);

  template <class F>
  static GridFunction from(const GridGeometry& g, F&& f) {
    GridFunction out(g);
    for (std::size_t i = 0; i < out.size(); ++i) out.values_[i] = f(out.node(i));
    return out;
  }

 private:
  GridGeometry g_;
  std::vector<double> values_;
  std::vector<std::size_t> strides_;
};

struct SchemeSettings {
  double dt = 0.05;
  double U = 2.0;               ///< control box [-U, U]^m
  int control_samples = 21;     ///< per axis
  bool legendre_candidate = true;
  double tol_fixed_point = 1e-9;
  long max_iters = 400'000;

  void validate() const;
};

/// dt U max|F| / (4 min cell) over the nodes; above 1 the step is coarse for the grid.
double cfl_ratio(const GridGeometry& g, const ControlSystem& sys, const SchemeSettings& s);

/// Semi-Lagrangian Lax-Oleinik operator with cached backstep stencils:
/// (Tv)(x) = min_u { dt L(x,u) + discount * v(x - dt F(x) u) } - c dt.
/// The optional Legendre candidate is appended after the sampled controls, so
/// exact ties keep the lowest sampled index.
class LaxOleinik {
 public:
  LaxOleinik(const Lagrangian& L, const ControlSystem& sys, GridGeometry g, SchemeSettings s);

  const GridGeometry& geometry() const { return g_; }
  const SchemeSettings& settings() const { return s_; }
  const std::vector<Vec>& controls() const { return controls_; }

  void apply(const GridFunction& v, double c, double discount, GridFunction& out) const;
  GridFunction apply(const GridFunction& v, double c, double discount = 1.0) const;
  /// Control attaining the minimum at a node.
  Vec minimizing_control(const GridFunction& v, std::size_t node, double discount = 1.0) const;

 private:
  struct Stencil {
    std::size_t base;
    double frac[kMaxDim];
  };
  Stencil stencil_for(const Vec& y) const;
  double interp(const std::vector<double>& v, const Stencil& st) const;
  void node_candidates(const GridFunction& v, std::size_t n, double discount, std::vector<double>& buf, Vec& cand) const;

  Lagrangian L_;
  ControlSystem sys_;
  GridGeometry g_;
  SchemeSettings s_;
  std::vector<Vec> controls_;
  std::vector<std::size_t> strides_;
  std::vector<std::size_t> corner_offsets_;
  std::vector<Vec> nodes_;
  std::vector<Mat> fields_;
  std::vector<Stencil> stencils_;  // node-major, one per sampled control
  std::vector<double> costs_;      // dt L(x,u)
};

/// One uncached step on v's own grid.
GridFunction lax_oleinik_step(const GridFunction& v, const Lagrangian& L, const ControlSystem& sys, double c,
                              const SchemeSettings& s);

struct HorizonSnapshot {
  double T = 0.0;
  int steps = 0;
  GridFunction V;
};

/// V_T from v_0 = 0 with c = 0, round(T/dt) steps.
GridFunction finite_horizon(const Lagrangian& L, const ControlSystem& sys, const GridGeometry& g, double T,
                            const SchemeSettings& s);
/// Snapshots at each T of an increasing ladder, computed in one sweep sequence.
std::vector<HorizonSnapshot> finite_horizon_ladder(const Lagrangian& L, const ControlSystem& sys, const GridGeometry& g,
                                                   const std::vector<double>& T_ladder, const SchemeSettings& s);

struct FixedPointResult {
  GridFunction value;
  bool converged = false;
  long iterations = 0;
  double residual = 0.0;        ///< last raw sup|Tv - v| before renormalisation
  double drift_per_sweep = 0.0; ///< value change at the normalisation point in the last sweep
};

/// v_lambda by value iteration from 0. Throws kNonConverged (detail = residual) after max_iters.
FixedPointResult discounted(const Lagrangian& L, const ControlSystem& sys, const GridGeometry& g, double lambda,
                            const SchemeSettings& s);

/// Iterates T with the given c from init (zero if null), renormalising chi(x*) = 0
/// after every sweep. Does not throw on non-convergence: the result is flagged.
FixedPointResult critical_solution(const Lagrangian& L, const ControlSystem& sys, const GridGeometry& g, double c,
                                   const SchemeSettings& s, const GridFunction* init = nullptr);

}  // namespace subkam
