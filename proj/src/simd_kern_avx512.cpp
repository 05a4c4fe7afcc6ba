// AVX-512F kernels.  Compiled with -mavx512f -mfma in its own TU; only reached
// through runtime dispatch.

#include "simd_internal.hpp"
#include "sjrp/simd.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <algorithm>
#include <cmath>

namespace sjrp::simd::detail {

bool avx512_supported() { return __builtin_cpu_supports("avx512f"); }

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

void mk_avx512(const double* apanel, int k, const double* b, int64_t ldb, double* c,
               int64_t ldc, int mrows, int ncols, bool acc) {
  // Panels are zero-padded to 8 rows and B tiles to 16 columns, so the
  // full-width compute path is always valid; stores are bounded/masked.
  if (ldb != 16) {
    mk_edge(apanel, k, b, ldb, c, ldc, mrows, ncols, acc);
    return;
  }
  __m512d a0_0 = _mm512_setzero_pd(), a0_1 = _mm512_setzero_pd();
  __m512d a1_0 = _mm512_setzero_pd(), a1_1 = _mm512_setzero_pd();
  __m512d a2_0 = _mm512_setzero_pd(), a2_1 = _mm512_setzero_pd();
  __m512d a3_0 = _mm512_setzero_pd(), a3_1 = _mm512_setzero_pd();
  __m512d a4_0 = _mm512_setzero_pd(), a4_1 = _mm512_setzero_pd();
  __m512d a5_0 = _mm512_setzero_pd(), a5_1 = _mm512_setzero_pd();
  __m512d a6_0 = _mm512_setzero_pd(), a6_1 = _mm512_setzero_pd();
  __m512d a7_0 = _mm512_setzero_pd(), a7_1 = _mm512_setzero_pd();
  const double* ap = apanel;
  const double* bp = b;
  for (int kk = 0; kk < k; ++kk, ap += 8, bp += ldb) {
    const __m512d b0 = _mm512_loadu_pd(bp);
    const __m512d b1 = _mm512_loadu_pd(bp + 8);
    __m512d av;
    av = _mm512_set1_pd(ap[0]);
    a0_0 = _mm512_fmadd_pd(av, b0, a0_0);
    a0_1 = _mm512_fmadd_pd(av, b1, a0_1);
    av = _mm512_set1_pd(ap[1]);
    a1_0 = _mm512_fmadd_pd(av, b0, a1_0);
    a1_1 = _mm512_fmadd_pd(av, b1, a1_1);
    av = _mm512_set1_pd(ap[2]);
    a2_0 = _mm512_fmadd_pd(av, b0, a2_0);
    a2_1 = _mm512_fmadd_pd(av, b1, a2_1);
    av = _mm512_set1_pd(ap[3]);
    a3_0 = _mm512_fmadd_pd(av, b0, a3_0);
    a3_1 = _mm512_fmadd_pd(av, b1, a3_1);
    av = _mm512_set1_pd(ap[4]);
    a4_0 = _mm512_fmadd_pd(av, b0, a4_0);
    a4_1 = _mm512_fmadd_pd(av, b1, a4_1);
    av = _mm512_set1_pd(ap[5]);
    a5_0 = _mm512_fmadd_pd(av, b0, a5_0);
    a5_1 = _mm512_fmadd_pd(av, b1, a5_1);
    av = _mm512_set1_pd(ap[6]);
    a6_0 = _mm512_fmadd_pd(av, b0, a6_0);
    a6_1 = _mm512_fmadd_pd(av, b1, a6_1);
    av = _mm512_set1_pd(ap[7]);
    a7_0 = _mm512_fmadd_pd(av, b0, a7_0);
    a7_1 = _mm512_fmadd_pd(av, b1, a7_1);
  }
  __m512d rows0[8] = {a0_0, a1_0, a2_0, a3_0, a4_0, a5_0, a6_0, a7_0};
  __m512d rows1[8] = {a0_1, a1_1, a2_1, a3_1, a4_1, a5_1, a6_1, a7_1};
  if (ncols == 16) {
    for (int i = 0; i < mrows; ++i) {
      double* cp = c + static_cast<int64_t>(i) * ldc;
      if (acc) {
        _mm512_storeu_pd(cp, _mm512_add_pd(_mm512_loadu_pd(cp), rows0[i]));
        _mm512_storeu_pd(cp + 8, _mm512_add_pd(_mm512_loadu_pd(cp + 8), rows1[i]));
      } else {
        _mm512_storeu_pd(cp, rows0[i]);
        _mm512_storeu_pd(cp + 8, rows1[i]);
      }
    }
  } else {
    const __mmask8 m0 = static_cast<__mmask8>((1u << std::min(ncols, 8)) - 1u);
    const __mmask8 m1 =
        ncols > 8 ? static_cast<__mmask8>((1u << (ncols - 8)) - 1u) : 0;
    for (int i = 0; i < mrows; ++i) {
      double* cp = c + static_cast<int64_t>(i) * ldc;
      __m512d v0 = rows0[i], v1 = rows1[i];
      if (acc) {
        v0 = _mm512_add_pd(_mm512_maskz_loadu_pd(m0, cp), v0);
        if (m1) v1 = _mm512_add_pd(_mm512_maskz_loadu_pd(m1, cp + 8), v1);
      }
      _mm512_mask_storeu_pd(cp, m0, v0);
      if (m1) _mm512_mask_storeu_pd(cp + 8, m1, v1);
    }
  }
}

inline __m512d expm1_vec(__m512d z) {
  z = _mm512_max_pd(z, _mm512_set1_pd(kExpClampLo));
  const __m512d kd = _mm512_roundscale_pd(_mm512_mul_pd(z, _mm512_set1_pd(kLog2e)),
                                          _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m512d r = _mm512_fmadd_pd(kd, _mm512_set1_pd(-kLn2Hi), z);
  r = _mm512_fmadd_pd(kd, _mm512_set1_pd(-kLn2Lo), r);
  __m512d p = _mm512_set1_pd(kExpC[kExpDegree]);
  for (int i = kExpDegree - 1; i >= 0; --i)
    p = _mm512_fmadd_pd(p, r, _mm512_set1_pd(kExpC[i]));
  const __m256i ki = _mm512_cvtpd_epi32(kd);
  const __m512i ke = _mm512_slli_epi64(
      _mm512_add_epi64(_mm512_cvtepi32_epi64(ki), _mm512_set1_epi64(1023)), 52);
  const __m512d scale = _mm512_castsi512_pd(ke);
  return _mm512_fmadd_pd(p, scale, _mm512_set1_pd(-1.0));
}

void elu_avx512(const double* z, double* a, int64_t n) {
  const __m512d zero = _mm512_setzero_pd();
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m512d zv = _mm512_loadu_pd(z + i);
    const __mmask8 neg = _mm512_cmp_pd_mask(zv, zero, _CMP_LT_OQ);
    if (neg == 0) {
      _mm512_storeu_pd(a + i, zv);
      continue;
    }
    const __m512d em = expm1_vec(_mm512_min_pd(zv, zero));
    _mm512_storeu_pd(a + i, _mm512_mask_blend_pd(neg, zv, em));
  }
  for (; i < n; ++i) a[i] = z[i] >= 0.0 ? z[i] : sjrp::simd::expm1_neg(z[i]);
}

void elu_backward_avx512(const double* a, const double* g, double* dz, int64_t n) {
  const __m512d zero = _mm512_setzero_pd();
  const __m512d one = _mm512_set1_pd(1.0);
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m512d av = _mm512_loadu_pd(a + i);
    const __m512d gv = _mm512_loadu_pd(g + i);
    const __mmask8 neg = _mm512_cmp_pd_mask(av, zero, _CMP_LT_OQ);
    const __m512d scaled = _mm512_mul_pd(gv, _mm512_add_pd(av, one));
    _mm512_storeu_pd(dz + i, _mm512_mask_blend_pd(neg, gv, scaled));
  }
  for (; i < n; ++i) dz[i] = a[i] >= 0.0 ? g[i] : g[i] * (a[i] + 1.0);
}

void add_bias_avx512(double* a, const double* bias, int rows, int64_t cols,
                     int64_t lda) {
  for (int i = 0; i < rows; ++i) {
    double* row = a + static_cast<int64_t>(i) * lda;
    const __m512d bv = _mm512_set1_pd(bias[i]);
    int64_t j = 0;
    for (; j + 8 <= cols; j += 8)
      _mm512_storeu_pd(row + j, _mm512_add_pd(_mm512_loadu_pd(row + j), bv));
    for (; j < cols; ++j) row[j] += bias[i];
  }
}

}  // namespace

Kernels avx512_kernels() {
  return Kernels{mk_avx512, elu_avx512, elu_backward_avx512, add_bias_avx512};
}

}  // namespace sjrp::simd::detail

#else

namespace sjrp::simd::detail {
bool avx512_supported() { return false; }
Kernels avx512_kernels() { return scalar_kernels(); }
}  // namespace sjrp::simd::detail

#endif
