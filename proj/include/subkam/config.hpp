#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "subkam/action.hpp"
#include "subkam/hjsolver.hpp"
#include "subkam/lagrangian.hpp"
#include "subkam/weakkam.hpp"

namespace subkam {

inline const std::vector<std::string>& known_tasks() {
  static const std::vector<std::string> tasks{"check-assumptions", "critical", "barrier", "aubry",
                                              "solve", "calibrate", "full-pipeline"};
  return tasks;
}

inline const std::vector<std::string>& known_instances() {
  static const std::vector<std::string> names{"euclidean-1d", "heisenberg", "double-well", "grushin", "custom"};
  return names;
}

/// Lagrangian and system description for instance = custom. Tables are rows of
/// numbers: potential rows are (coeff, e_1, ..., e_d); field rows are A (row-major, d*d) then b (d).
struct CustomInstance {
  std::string system = "euclidean";  ///< euclidean | heisenberg | grushin | affine
  int d = 1;
  int m = 1;
  std::vector<std::vector<double>> fields;
  double field_growth = 1.0;
  std::vector<std::vector<double>> numerator{{1.0, 2.0}};
  std::vector<std::vector<double>> denominator;
  std::string kinetic = "quadratic";  ///< quadratic | quartic
  double beta = 0.0;
  std::vector<double> x_star{0.0};
  double attractor_radius = 1.0;
  double gap = 0.0;
  double growth_C1 = 1.0;
};

struct RunConfig {
  std::string instance = "euclidean-1d";
  std::string task = "critical";
  std::uint64_t seed = 0;
  std::string out_dir = "subkam-out";

  // [instance]
  double shift = 0.0;
  CustomInstance custom;

  // [assumptions]
  int assumption_samples = 2000;
  SampleBoxes sample_boxes;
  int field_samples = 500;
  double oracle_radius = 3.0;
  int oracle_grid = 61;

  // [action]
  OptimizerSettings optimizer;

  // [hj]
  double hj_half_width = 2.0;
  int hj_resolution = 401;
  SchemeSettings scheme;
  /// 0 lets "solve" use the critical constant picked by the pipeline.
  double solve_c_offset = 0.0;

  // [critical]
  std::vector<double> probe_point{0.5};
  std::vector<double> t_ladder{25, 50, 100, 200};
  std::vector<double> lambda_ladder{0.1, 0.05, 0.02, 0.01};
  bool cross_check = true;
  double lp_R = 2.0;
  double lp_U = 0.0;
  std::vector<int> lp_n_x{21, 41, 81};
  std::vector<int> lp_n_u{21, 41, 41};
  int lp_degree = 4;
  int dual_samples = 41;
  int dual_sweeps = 20;

  // [barrier]
  BarrierSettings barrier;
  int n_triples = 50;
  double triple_radius = 1.5;

  // [aubry]
  double probe_radius = 1.5;
  double probe_spacing = 0.25;
  double eps_A = 0.0;

  // [calibrate]
  double calibrate_horizon = 5.0;
  double calibrate_dt = 0.01;

  GridGeometry hj_geometry() const;
};

/// Parses the line-oriented format:
///   # comment
///   key = value            (several assignments may share a line, separated by commas)
///   [section]
/// Lists are comma or space separated; tables are [[...], [...]].
/// Unknown keys, bad values, and unknown instances or tasks raise
/// Error(kConfig) with the line number in the message.
RunConfig parse_config(const std::string& text);

/// Effective configuration in the same format; parse_config(echo_config(c)) reproduces c.
std::string echo_config(const RunConfig& c);

/// Instance-specific defaults (grids, ladders, barrier window) applied before overrides.
void apply_instance_defaults(RunConfig& c);

}  // namespace subkam
