// NEON kernels for aarch64 builds; same k-ordered fma semantics as the scalar
// reference.

#include "simd_internal.hpp"
#include "sjrp/simd.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

#include <algorithm>

#include <cmath>

namespace sjrp::simd::detail {

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

// 4 rows x 8 columns of float64x2 accumulators.
inline void mk4x8(const double* apanel, int i0, int k, const double* b, int64_t ldb,
                  double* c, int64_t ldc, int store_rows, bool acc) {
  float64x2_t r[4][4];
  for (auto& row : r)
    for (auto& v : row) v = vdupq_n_f64(0.0);
  const double* ap = apanel + i0;
  const double* bp = b;
  for (int kk = 0; kk < k; ++kk, ap += 8, bp += ldb) {
    float64x2_t bv[4] = {vld1q_f64(bp), vld1q_f64(bp + 2), vld1q_f64(bp + 4),
                         vld1q_f64(bp + 6)};
    for (int i = 0; i < 4; ++i) {
      const float64x2_t av = vdupq_n_f64(ap[i]);
      r[i][0] = vfmaq_f64(r[i][0], av, bv[0]);
      r[i][1] = vfmaq_f64(r[i][1], av, bv[1]);
      r[i][2] = vfmaq_f64(r[i][2], av, bv[2]);
      r[i][3] = vfmaq_f64(r[i][3], av, bv[3]);
    }
  }
  for (int i = 0; i < store_rows; ++i) {
    double* cp = c + static_cast<int64_t>(i0 + i) * ldc;
    for (int v = 0; v < 4; ++v) {
      if (acc)
        vst1q_f64(cp + 2 * v, vaddq_f64(vld1q_f64(cp + 2 * v), r[i][v]));
      else
        vst1q_f64(cp + 2 * v, r[i][v]);
    }
  }
}

void mk_neon(const double* apanel, int k, const double* b, int64_t ldb, double* c,
             int64_t ldc, int mrows, int ncols, bool acc) {
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

void elu_neon(const double* z, double* a, int64_t n) {
  for (int64_t i = 0; i < n; ++i)
    a[i] = z[i] >= 0.0 ? z[i] : sjrp::simd::expm1_neg(z[i]);
}

void elu_backward_neon(const double* a, const double* g, double* dz, int64_t n) {
  for (int64_t i = 0; i < n; ++i) dz[i] = a[i] >= 0.0 ? g[i] : g[i] * (a[i] + 1.0);
}

void add_bias_neon(double* a, const double* bias, int rows, int64_t cols, int64_t lda) {
  for (int i = 0; i < rows; ++i) {
    double* row = a + static_cast<int64_t>(i) * lda;
    const float64x2_t bv = vdupq_n_f64(bias[i]);
    int64_t j = 0;
    for (; j + 2 <= cols; j += 2) vst1q_f64(row + j, vaddq_f64(vld1q_f64(row + j), bv));
    for (; j < cols; ++j) row[j] += bias[i];
  }
}

}  // namespace

Kernels neon_kernels() {
  return Kernels{mk_neon, elu_neon, elu_backward_neon, add_bias_neon};
}

}  // namespace sjrp::simd::detail

#endif
