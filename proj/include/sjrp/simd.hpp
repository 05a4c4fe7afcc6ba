#pragma once

#include <cstdint>
#include <vector>

namespace sjrp::simd {

// Dense f64 kernels behind the training and policy-evaluation loops.
//
// A scalar reference kernel defines the semantics; the AVX2 / AVX-512 / NEON
// variants are selected at runtime and must reproduce it bit-for-bit: every
// output element is an fma chain accumulated in ascending-k order, so neither
// the ISA nor the worker count changes results.

enum class Isa { scalar, avx2, avx512, neon };

Isa detect_best_isa();
Isa active_isa();
void set_active_isa(Isa isa);  // throws if unsupported on this host
const char* isa_name(Isa isa);

/// Rows per packed A panel (fixed layout shared by all kernels).
inline constexpr int kPanelRows = 8;
/// Column tile width used by the drivers.
inline constexpr int kTileCols = 16;

/// Pack A[M x K] (row-major, row stride lda) into kPanelRows-row panels:
/// panel p holds A[p*8 + i][k] at out[p*8*K + k*8 + i], zero-padded rows.
void pack_a(const double* a, int m, int k, int64_t lda, std::vector<double>& out);

/// C[M x N] = (acc ? C : 0) + Apack * B, with B row-major [K x N] stride ldb.
void gemm_packed(const double* apack, int m, int k, const double* b, int64_t ldb,
                 double* c, int64_t ldc, int n, bool acc);

/// C[M x N] = (acc ? C : 0) + A * B, where the logical B[k][j] = bsrc[j][k]
/// (bsrc is [N x K] row-major, stride ldbsrc).  A is packed on the fly.
void gemm_bt(const double* a, int64_t lda, int m, int k, const double* bsrc,
             int64_t ldbsrc, double* c, int64_t ldc, int n, bool acc);

/// a[i] = z[i] for z >= 0, expm1(z) otherwise.
void elu(const double* z, double* a, int64_t n);

/// dz[i] = g[i] * elu'(z[i]) recovered from the stored activation:
/// elu' = 1 where a >= 0, a + 1 otherwise.
void elu_backward(const double* a, const double* g, double* dz, int64_t n);

/// a[i][j] += bias[i] over an [rows x cols] row-major block with stride lda.
void add_bias(double* a, const double* bias, int rows, int64_t cols, int64_t lda);

/// Scalar expm1 used by the ELU kernels (shared polynomial so that scalar and
/// vector paths agree bitwise).  Defined for z <= 0.
double expm1_neg(double z);

}  // namespace sjrp::simd
