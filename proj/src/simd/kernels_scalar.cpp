#include <cmath>
#include <cstdlib>
#include <cstring>

#include "subkam/simd/kernels.hpp"

namespace subkam::simd {
namespace {

void axpy_scalar(double* y, const double* x, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(double* y, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= a;
}

MinLoc argmin_scalar(const double* v, std::size_t n) {
  MinLoc best{v[0], 0};
  for (std::size_t i = 1; i < n; ++i) {
    if (v[i] < best.value) best = {v[i], i};
  }
  return best;
}

double max_abs_diff_scalar(const double* a, const double* b, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::fabs(a[i] - b[i]);
    if (d > m) m = d;
  }
  return m;
}

std::size_t first_below_scalar(const double* v, double threshold, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (v[i] < threshold) return i;
  }
  return n;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", axpy_scalar, scale_scalar, argmin_scalar, max_abs_diff_scalar,
                                 first_below_scalar};
  return table;
}

const KernelTable& active() {
  static const KernelTable* chosen = [] {
    const char* env = std::getenv("SUBKAM_SIMD");
    if (env != nullptr && std::strcmp(env, "scalar") == 0) return &scalar_kernels();
    if (const KernelTable* t = avx2_kernels()) return t;
    return &scalar_kernels();
  }();
  return *chosen;
}

}  // namespace subkam::simd
