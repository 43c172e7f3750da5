#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace subkam {

/// Largest state/control dimension supported. Small fixed capacity keeps
/// points on the stack inside the integrator and grid sweeps.
inline constexpr int kMaxDim = 6;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

enum class ErrorKind {
  kInvalidSystem,
  kInvalidArgument,
  kBlowUp,
  kEvaluation,
  kConvexityViolation,
  kInfeasibleEndpoint,
  kSupportViolation,
  kLpInternal,
  kNonConverged,
  kOutOfBox,
  kConfig,
  kIo,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, double detail = std::numeric_limits<double>::quiet_NaN())
      : std::runtime_error(what), kind_(kind), detail_(detail) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Numeric payload, e.g. the best endpoint gap or the last residual.
  double detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  double detail_;
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }

inline Vec zeros(int n) { return Vec::Zero(n); }

}  // namespace subkam
