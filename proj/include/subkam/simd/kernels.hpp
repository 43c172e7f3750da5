#pragma once

// Data-parallel inner loops shared by the simplex pivots and the
// semi-Lagrangian sweeps. Every kernel has a scalar reference version and,
// on x86-64, an AVX2 version; the table is picked once at runtime.
//
// The AVX2 kernels avoid FMA contraction so they agree bit-for-bit with the
// scalar reference. That keeps run output independent of the CPU.

#include <cstddef>
#include <span>
#include <string_view>

namespace subkam::simd {

struct MinLoc {
  double value;
  std::size_t index;
};

struct KernelTable {
  std::string_view name;
  /// y[i] += a * x[i]
  void (*axpy)(double* y, const double* x, double a, std::size_t n);
  /// y[i] *= a
  void (*scale)(double* y, double a, std::size_t n);
  /// Minimum and the lowest index attaining it. n >= 1.
  MinLoc (*argmin)(const double* v, std::size_t n);
  /// max_i |a[i] - b[i]|, 0 for n == 0.
  double (*max_abs_diff)(const double* a, const double* b, std::size_t n);
  /// Lowest index with v[i] < threshold, or n if none.
  std::size_t (*first_below)(const double* v, double threshold, std::size_t n);
};

const KernelTable& scalar_kernels();

/// nullptr when the build or the CPU lacks AVX2.
const KernelTable* avx2_kernels();

/// Table used by the library. SUBKAM_SIMD=scalar forces the reference path.
const KernelTable& active();

inline void axpy(std::span<double> y, std::span<const double> x, double a) {
  active().axpy(y.data(), x.data(), a, y.size());
}
inline void scale(std::span<double> y, double a) { active().scale(y.data(), a, y.size()); }
inline MinLoc argmin(std::span<const double> v) { return active().argmin(v.data(), v.size()); }
inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  return active().max_abs_diff(a.data(), b.data(), a.size());
}
inline std::size_t first_below(std::span<const double> v, double threshold) {
  return active().first_below(v.data(), threshold, v.size());
}

}  // namespace subkam::simd
