// AVX2+FMA kernels, dispatched at runtime.

#include "simd_internal.hpp"
#include "sjrp/simd.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <algorithm>

#include <cmath>

namespace sjrp::simd::detail {

bool avx2_supported() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

namespace {

void mk_edge(const double* apanel, int k, const double* b, int64_t ldb, double* c,
             int64_t ldc, int mrows, int ncols, bool acc) {
  for (int i = 0; i < mrows; ++i) {
    for (int j = 0; j < ncols; ++j) {
      double s = 0.0;
      for (int kk = 0; kk < k; ++kk)
        s = std::fma(apanel[static_cast<int64_t>(kk) * 8 + i],
                     b[static_cast<int64_t>(kk) * ldb + j], s);
      double* cp = c + static_cast<int64_t>(i) * ldc + j;
      *cp = acc ? *cp + s : s;
    }
  }
}

// One 4-row x 8-col sub-tile; apanel rows [i0, i0+4).
inline void mk4x8(const double* apanel, int i0, int k, const double* b, int64_t ldb,
                  double* c, int64_t ldc, int store_rows, bool acc) {
  __m256d a0_0 = _mm256_setzero_pd(), a0_1 = _mm256_setzero_pd();
  __m256d a1_0 = _mm256_setzero_pd(), a1_1 = _mm256_setzero_pd();
  __m256d a2_0 = _mm256_setzero_pd(), a2_1 = _mm256_setzero_pd();
  __m256d a3_0 = _mm256_setzero_pd(), a3_1 = _mm256_setzero_pd();
  const double* ap = apanel + i0;
  const double* bp = b;
  for (int kk = 0; kk < k; ++kk, ap += 8, bp += ldb) {
    const __m256d b0 = _mm256_loadu_pd(bp);
    const __m256d b1 = _mm256_loadu_pd(bp + 4);
    __m256d av;
    av = _mm256_set1_pd(ap[0]);
    a0_0 = _mm256_fmadd_pd(av, b0, a0_0);
    a0_1 = _mm256_fmadd_pd(av, b1, a0_1);
    av = _mm256_set1_pd(ap[1]);
    a1_0 = _mm256_fmadd_pd(av, b0, a1_0);
    a1_1 = _mm256_fmadd_pd(av, b1, a1_1);
    av = _mm256_set1_pd(ap[2]);
    a2_0 = _mm256_fmadd_pd(av, b0, a2_0);
    a2_1 = _mm256_fmadd_pd(av, b1, a2_1);
    av = _mm256_set1_pd(ap[3]);
    a3_0 = _mm256_fmadd_pd(av, b0, a3_0);
    a3_1 = _mm256_fmadd_pd(av, b1, a3_1);
  }
  __m256d rows[4][2] = {{a0_0, a0_1}, {a1_0, a1_1}, {a2_0, a2_1}, {a3_0, a3_1}};
  for (int i = 0; i < store_rows; ++i) {
    double* cp = c + static_cast<int64_t>(i0 + i) * ldc;
    if (acc) {
      _mm256_storeu_pd(cp, _mm256_add_pd(_mm256_loadu_pd(cp), rows[i][0]));
      _mm256_storeu_pd(cp + 4, _mm256_add_pd(_mm256_loadu_pd(cp + 4), rows[i][1]));
    } else {
      _mm256_storeu_pd(cp, rows[i][0]);
      _mm256_storeu_pd(cp + 4, rows[i][1]);
    }
  }
}

void mk_avx2(const double* apanel, int k, const double* b, int64_t ldb, double* c,
             int64_t ldc, int mrows, int ncols, bool acc) {
  // Panels are zero-padded to 8 rows and B tiles to 16 columns; partial tiles
  // compute full width into a buffer and copy the valid columns out.
  if (ldb != 16) {
    mk_edge(apanel, k, b, ldb, c, ldc, mrows, ncols, acc);
    return;
  }
  if (ncols == 16) {
    mk4x8(apanel, 0, k, b, ldb, c, ldc, std::min(mrows, 4), acc);
    mk4x8(apanel, 0, k, b + 8, ldb, c + 8, ldc, std::min(mrows, 4), acc);
    if (mrows > 4) {
      mk4x8(apanel, 4, k, b, ldb, c, ldc, mrows - 4, acc);
      mk4x8(apanel, 4, k, b + 8, ldb, c + 8, ldc, mrows - 4, acc);
    }
    return;
  }
  double buf[8 * 16];
  mk4x8(apanel, 0, k, b, 16, buf, 16, 4, false);
  mk4x8(apanel, 0, k, b + 8, 16, buf + 8, 16, 4, false);
  mk4x8(apanel, 4, k, b, 16, buf, 16, 4, false);
  mk4x8(apanel, 4, k, b + 8, 16, buf + 8, 16, 4, false);
  for (int i = 0; i < mrows; ++i) {
    double* cp = c + static_cast<int64_t>(i) * ldc;
    for (int j = 0; j < ncols; ++j)
      cp[j] = acc ? cp[j] + buf[i * 16 + j] : buf[i * 16 + j];
  }
}

inline __m256d expm1_vec(__m256d z) {
  z = _mm256_max_pd(z, _mm256_set1_pd(kExpClampLo));
  const __m256d kd = _mm256_round_pd(_mm256_mul_pd(z, _mm256_set1_pd(kLog2e)),
                                     _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fmadd_pd(kd, _mm256_set1_pd(-kLn2Hi), z);
  r = _mm256_fmadd_pd(kd, _mm256_set1_pd(-kLn2Lo), r);
  __m256d p = _mm256_set1_pd(kExpC[kExpDegree]);
  for (int i = kExpDegree - 1; i >= 0; --i)
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kExpC[i]));
  const __m128i ki = _mm256_cvtpd_epi32(kd);
  const __m256i ke = _mm256_slli_epi64(
      _mm256_add_epi64(_mm256_cvtepi32_epi64(ki), _mm256_set1_epi64x(1023)), 52);
  const __m256d scale = _mm256_castsi256_pd(ke);
  return _mm256_fmadd_pd(p, scale, _mm256_set1_pd(-1.0));
}

void elu_avx2(const double* z, double* a, int64_t n) {
  const __m256d zero = _mm256_setzero_pd();
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d zv = _mm256_loadu_pd(z + i);
    const __m256d neg = _mm256_cmp_pd(zv, zero, _CMP_LT_OQ);
    if (_mm256_movemask_pd(neg) == 0) {
      _mm256_storeu_pd(a + i, zv);
      continue;
    }
    const __m256d em = expm1_vec(_mm256_min_pd(zv, zero));
    _mm256_storeu_pd(a + i, _mm256_blendv_pd(zv, em, neg));
  }
  for (; i < n; ++i) a[i] = z[i] >= 0.0 ? z[i] : sjrp::simd::expm1_neg(z[i]);
}

void elu_backward_avx2(const double* a, const double* g, double* dz, int64_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d av = _mm256_loadu_pd(a + i);
    const __m256d gv = _mm256_loadu_pd(g + i);
    const __m256d neg = _mm256_cmp_pd(av, zero, _CMP_LT_OQ);
    const __m256d scaled = _mm256_mul_pd(gv, _mm256_add_pd(av, one));
    _mm256_storeu_pd(dz + i, _mm256_blendv_pd(gv, scaled, neg));
  }
  for (; i < n; ++i) dz[i] = a[i] >= 0.0 ? g[i] : g[i] * (a[i] + 1.0);
}

void add_bias_avx2(double* a, const double* bias, int rows, int64_t cols, int64_t lda) {
  for (int i = 0; i < rows; ++i) {
    double* row = a + static_cast<int64_t>(i) * lda;
    const __m256d bv = _mm256_set1_pd(bias[i]);
    int64_t j = 0;
    for (; j + 4 <= cols; j += 4)
      _mm256_storeu_pd(row + j, _mm256_add_pd(_mm256_loadu_pd(row + j), bv));
    for (; j < cols; ++j) row[j] += bias[i];
  }
}

}  // namespace

Kernels avx2_kernels() {
  return Kernels{mk_avx2, elu_avx2, elu_backward_avx2, add_bias_avx2};
}

}  // namespace sjrp::simd::detail

#else

namespace sjrp::simd::detail {
bool avx2_supported() { return false; }
Kernels avx2_kernels() { return scalar_kernels(); }
}  // namespace sjrp::simd::detail

#endif
