#include "sjrp/simd.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "simd_internal.hpp"
#include "sjrp/parallel.hpp"

namespace sjrp::simd {

using detail::Kernels;

double expm1_neg(double z) {
  if (z < detail::kExpClampLo) z = detail::kExpClampLo;
  const double kd = std::rint(z * detail::kLog2e);
  double r = std::fma(kd, -detail::kLn2Hi, z);
  r = std::fma(kd, -detail::kLn2Lo, r);
  double p = detail::kExpC[detail::kExpDegree];
  for (int i = detail::kExpDegree - 1; i >= 0; --i) p = std::fma(p, r, detail::kExpC[i]);
  const int64_t ki = static_cast<int64_t>(kd);
  const double scale = std::bit_cast<double>(static_cast<uint64_t>(ki + 1023) << 52);
  return std::fma(p, scale, -1.0);
}

namespace {

// ----------------------------- scalar kernels -------------------------------

void mk_scalar(const double* apanel, int k, const double* b, int64_t ldb, double* c,
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

void elu_scalar(const double* z, double* a, int64_t n) {
  for (int64_t i = 0; i < n; ++i) a[i] = z[i] >= 0.0 ? z[i] : expm1_neg(z[i]);
}

void elu_backward_scalar(const double* a, const double* g, double* dz, int64_t n) {
  for (int64_t i = 0; i < n; ++i) dz[i] = a[i] >= 0.0 ? g[i] : g[i] * (a[i] + 1.0);
}

void add_bias_scalar(double* a, const double* bias, int rows, int64_t cols,
                     int64_t lda) {
  for (int i = 0; i < rows; ++i) {
    double* row = a + static_cast<int64_t>(i) * lda;
    const double bi = bias[i];
    for (int64_t j = 0; j < cols; ++j) row[j] += bi;
  }
}

Kernels& active_kernels() {
  static Kernels k = [] {
    switch (detect_best_isa()) {
      case Isa::avx512:
        return detail::avx512_kernels();
      case Isa::avx2:
        return detail::avx2_kernels();
#if defined(__aarch64__)
      case Isa::neon:
        return detail::neon_kernels();
#endif
      default:
        return detail::scalar_kernels();
    }
  }();
  return k;
}

Isa& active_isa_ref() {
  static Isa isa = detect_best_isa();
  return isa;
}

// Serial threshold: below this flop count the pool is not engaged.
constexpr int64_t kSerialFlops = 1 << 21;

}  // namespace

namespace detail {

Kernels scalar_kernels() {
  return Kernels{mk_scalar, elu_scalar, elu_backward_scalar, add_bias_scalar};
}

}  // namespace detail

Isa detect_best_isa() {
#if defined(__x86_64__) || defined(_M_X64)
  if (detail::avx512_supported()) return Isa::avx512;
  if (detail::avx2_supported()) return Isa::avx2;
  return Isa::scalar;
#elif defined(__aarch64__)
  return Isa::neon;
#else
  return Isa::scalar;
#endif
}

Isa active_isa() { return active_isa_ref(); }

void set_active_isa(Isa isa) {
  Kernels k;
  switch (isa) {
    case Isa::scalar:
      k = detail::scalar_kernels();
      break;
    case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      if (!detail::avx2_supported()) throw std::runtime_error("avx2 not supported here");
      k = detail::avx2_kernels();
      break;
#else
      throw std::runtime_error("avx2 not supported here");
#endif
    case Isa::avx512:
#if defined(__x86_64__) || defined(_M_X64)
      if (!detail::avx512_supported())
        throw std::runtime_error("avx512 not supported here");
      k = detail::avx512_kernels();
      break;
#else
      throw std::runtime_error("avx512 not supported here");
#endif
    case Isa::neon:
#if defined(__aarch64__)
      k = detail::neon_kernels();
      break;
#else
      throw std::runtime_error("neon not supported here");
#endif
  }
  active_kernels() = k;
  active_isa_ref() = isa;
}

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::avx512:
      return "avx512";
    case Isa::neon:
      return "neon";
  }
  return "?";
}

void pack_a(const double* a, int m, int k, int64_t lda, std::vector<double>& out) {
  const int panels = (m + kPanelRows - 1) / kPanelRows;
  out.resize(static_cast<size_t>(panels) * kPanelRows * k);
  auto pack_panel = [&](int p) {
    double* dst = out.data() + static_cast<int64_t>(p) * kPanelRows * k;
    const int rows = std::min(kPanelRows, m - p * kPanelRows);
    const double* src = a + static_cast<int64_t>(p) * kPanelRows * lda;
    if (rows == 8) {
      // Sequential writes; eight concurrent row streams on the read side.
      for (int kk = 0; kk < k; ++kk) {
        double* d = dst + static_cast<int64_t>(kk) * 8;
        d[0] = src[kk];
        d[1] = src[lda + kk];
        d[2] = src[2 * lda + kk];
        d[3] = src[3 * lda + kk];
        d[4] = src[4 * lda + kk];
        d[5] = src[5 * lda + kk];
        d[6] = src[6 * lda + kk];
        d[7] = src[7 * lda + kk];
      }
    } else {
      for (int kk = 0; kk < k; ++kk) {
        double* d = dst + static_cast<int64_t>(kk) * 8;
        for (int i = 0; i < rows; ++i) d[i] = src[static_cast<int64_t>(i) * lda + kk];
        for (int i = rows; i < 8; ++i) d[i] = 0.0;
      }
    }
  };
  if (static_cast<int64_t>(panels) * k > (1 << 17))
    parallel::parallel_for(panels, [&](int64_t p0, int64_t p1) {
      for (int64_t p = p0; p < p1; ++p) pack_panel(static_cast<int>(p));
    });
  else
    for (int p = 0; p < panels; ++p) pack_panel(p);
}

namespace {

// Column-block width for B packing (multiple of kTileCols, sized for L2).
constexpr int kColBlock = 128;
// k-chunk so that B slabs and C tiles stay cache-resident for large K.  Part
// of the shared driver: every ISA accumulates chunks in the same order, so
// results stay bit-identical across kernels and thread counts.
constexpr int kKChunk = 768;

// Shared driver.  B is packed chunk-by-chunk into contiguous [tile][k][16]
// slabs so the microkernel streams it; `transposed` selects whether the
// logical B[k][j] comes from bsrc[k*ldb + j] or bsrc[j*ldb + k].
void gemm_driver(const double* apack, int m, int k, const double* bsrc, int64_t ldb,
                 bool transposed, double* c, int64_t ldc, int n, bool acc) {
  if (m <= 0 || n <= 0) return;
  const Kernels kern = active_kernels();
  const int panels = (m + kPanelRows - 1) / kPanelRows;
  const int blocks = (n + kColBlock - 1) / kColBlock;
  auto work = [&](int64_t b0, int64_t b1) {
    thread_local std::vector<double> bpack;
    if (bpack.size() < static_cast<size_t>(std::min(k, kKChunk)) * kColBlock)
      bpack.resize(static_cast<size_t>(std::min(k, kKChunk)) * kColBlock);
    for (int64_t blk = b0; blk < b1; ++blk) {
      const int j0 = static_cast<int>(blk) * kColBlock;
      const int ncols = std::min(kColBlock, n - j0);
      const int tiles = (ncols + kTileCols - 1) / kTileCols;
      for (int kc0 = 0; kc0 < k; kc0 += kKChunk) {
        const int kc = std::min(kKChunk, k - kc0);
        // Pack this column block / k-chunk of B.
        if (transposed) {
          for (int t = 0; t < tiles; ++t) {
            double* dst = bpack.data() + static_cast<size_t>(t) * kc * kTileCols;
            const int jt = j0 + t * kTileCols;
            const int w = std::min(kTileCols, n - jt);
            for (int j = 0; j < w; ++j) {
              const double* src = bsrc + static_cast<int64_t>(jt + j) * ldb + kc0;
              for (int kk = 0; kk < kc; ++kk)
                dst[static_cast<size_t>(kk) * kTileCols + j] = src[kk];
            }
            // Zero-pad missing columns so kernels can run full width.
            for (int j = w; j < kTileCols; ++j)
              for (int kk = 0; kk < kc; ++kk)
                dst[static_cast<size_t>(kk) * kTileCols + j] = 0.0;
          }
        } else {
          const size_t tile_stride = static_cast<size_t>(kc) * kTileCols;
          for (int kk = 0; kk < kc; ++kk) {
            const double* src = bsrc + static_cast<int64_t>(kc0 + kk) * ldb + j0;
            double* dst = bpack.data() + static_cast<size_t>(kk) * kTileCols;
            for (int t = 0; t < tiles; ++t) {
              const int w = std::min(kTileCols, ncols - t * kTileCols);
              for (int j = 0; j < w; ++j)
                dst[t * tile_stride + j] = src[t * kTileCols + j];
              for (int j = w; j < kTileCols; ++j) dst[t * tile_stride + j] = 0.0;
            }
          }
        }
        const bool acc_chunk = acc || kc0 > 0;
        for (int pnl = 0; pnl < panels; ++pnl) {
          const int mr = std::min(kPanelRows, m - pnl * kPanelRows);
          const double* ap =
              apack + static_cast<int64_t>(pnl) * kPanelRows * k + static_cast<int64_t>(kc0) * kPanelRows;
          double* crow = c + static_cast<int64_t>(pnl) * kPanelRows * ldc;
          for (int t = 0; t < tiles; ++t) {
            const int jt = j0 + t * kTileCols;
            const int w = std::min(kTileCols, n - jt);
            kern.microkernel(ap, kc,
                             bpack.data() + static_cast<size_t>(t) * kc * kTileCols,
                             kTileCols, crow + jt, ldc, mr, w, acc_chunk);
          }
        }
      }
    }
  };
  if (2.0 * m * n * k < kSerialFlops)
    work(0, blocks);
  else
    parallel::parallel_for(blocks, work);
}

}  // namespace

void gemm_packed(const double* apack, int m, int k, const double* b, int64_t ldb,
                 double* c, int64_t ldc, int n, bool acc) {
  gemm_driver(apack, m, k, b, ldb, /*transposed=*/false, c, ldc, n, acc);
}

void gemm_bt(const double* a, int64_t lda, int m, int k, const double* bsrc,
             int64_t ldbsrc, double* c, int64_t ldc, int n, bool acc) {
  if (m <= 0 || n <= 0) return;
  thread_local std::vector<double> apack;
  pack_a(a, m, k, lda, apack);
  gemm_driver(apack.data(), m, k, bsrc, ldbsrc, /*transposed=*/true, c, ldc, n, acc);
}

void elu(const double* z, double* a, int64_t n) { active_kernels().elu(z, a, n); }

void elu_backward(const double* a, const double* g, double* dz, int64_t n) {
  active_kernels().elu_backward(a, g, dz, n);
}

void add_bias(double* a, const double* bias, int rows, int64_t cols, int64_t lda) {
  active_kernels().add_bias(a, bias, rows, cols, lda);
}

}  // namespace sjrp::simd
