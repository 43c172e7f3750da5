#pragma once

#include <string>

#include "subkam/config.hpp"
#include "subkam/lagrangian.hpp"
#include "subkam/systems.hpp"

namespace subkam {

struct Instance {
  std::string name;
  ControlSystem sys;
  Lagrangian L;
  /// c = min L(., 0) is available in closed form or by the grid oracle.
  bool has_oracle = true;
  bool experimental = false;
};

/// Built-in instances:
///   euclidean-1d  V = x^2/(1+x^2), x* = 0
///   heisenberg    V = r^2/(1+r^2) with r the horizontal radius, x* = 0
///   double-well   V = (x^2-1)^2, x* = -1
///   grushin       V = |x|^2/(1+|x|^2) on the Grushin plane (experimental)
///   custom        from the [instance] table
/// A nonzero shift adds a constant to L.
Instance make_instance(const RunConfig& c);

}  // namespace subkam
