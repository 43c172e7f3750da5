// Compiled with -mavx2 only (no -mfma): see kernels.hpp.
#include "subkam/simd/kernels.hpp"

#if defined(SUBKAM_HAVE_AVX2)

#include <immintrin.h>

#include <cmath>

namespace subkam::simd {
namespace {

void axpy_avx2(double* y, const double* x, double a, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vx = _mm256_loadu_pd(x + i);
    const __m256d vy = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(va, vx)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(double* y, double a, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(y + i), va));
  }
  for (; i < n; ++i) y[i] *= a;
}

MinLoc argmin_avx2(const double* v, std::size_t n) {
  if (n < 8) {
    MinLoc best{v[0], 0};
    for (std::size_t i = 1; i < n; ++i) {
      if (v[i] < best.value) best = {v[i], i};
    }
    return best;
  }
  // Per-lane running minimum; strict comparison keeps the earliest index in
  // each lane, and the final reduction breaks value ties by index.
  __m256d best_val = _mm256_loadu_pd(v);
  __m256d best_idx = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);
  __m256d idx = best_idx;
  const __m256d four = _mm256_set1_pd(4.0);
  std::size_t i = 4;
  for (; i + 4 <= n; i += 4) {
    idx = _mm256_add_pd(idx, four);
    const __m256d cur = _mm256_loadu_pd(v + i);
    const __m256d lt = _mm256_cmp_pd(cur, best_val, _CMP_LT_OQ);
    best_val = _mm256_blendv_pd(best_val, cur, lt);
    best_idx = _mm256_blendv_pd(best_idx, idx, lt);
  }
  alignas(32) double vals[4];
  alignas(32) double idxs[4];
  _mm256_store_pd(vals, best_val);
  _mm256_store_pd(idxs, best_idx);
  MinLoc best{vals[0], static_cast<std::size_t>(idxs[0])};
  for (int lane = 1; lane < 4; ++lane) {
    const auto li = static_cast<std::size_t>(idxs[lane]);
    if (vals[lane] < best.value || (vals[lane] == best.value && li < best.index)) best = {vals[lane], li};
  }
  for (; i < n; ++i) {
    if (v[i] < best.value) best = {v[i], i};
  }
  return best;
}

double max_abs_diff_avx2(const double* a, const double* b, std::size_t n) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  __m256d m = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    m = _mm256_max_pd(m, _mm256_andnot_pd(sign_mask, d));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, m);
  double out = 0.0;
  for (double l : lanes) out = l > out ? l : out;
  for (; i < n; ++i) {
    const double d = std::fabs(a[i] - b[i]);
    if (d > out) out = d;
  }
  return out;
}

std::size_t first_below_avx2(const double* v, double threshold, std::size_t n) {
  const __m256d t = _mm256_set1_pd(threshold);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const int mask = _mm256_movemask_pd(_mm256_cmp_pd(_mm256_loadu_pd(v + i), t, _CMP_LT_OQ));
    if (mask != 0) return i + static_cast<std::size_t>(__builtin_ctz(static_cast<unsigned>(mask)));
  }
  for (; i < n; ++i) {
    if (v[i] < threshold) return i;
  }
  return n;
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const KernelTable table{"avx2", axpy_avx2, scale_avx2, argmin_avx2, max_abs_diff_avx2, first_below_avx2};
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &table : nullptr;
}

}  // namespace subkam::simd

#else

namespace subkam::simd {
const KernelTable* avx2_kernels() { return nullptr; }
}  // namespace subkam::simd

#endif
