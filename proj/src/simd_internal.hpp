#pragma once

#include <cstdint>

namespace sjrp::simd::detail {

// One C tile: [mrows x ncols] with mrows <= 8, ncols <= 16.
// apanel is k-major with 8-row panels: apanel[k*8 + i].
// b is row-major: b[k*ldb + j].
using MicrokernelFn = void (*)(const double* apanel, int k, const double* b,
                               int64_t ldb, double* c, int64_t ldc, int mrows,
                               int ncols, bool acc);
using EluFn = void (*)(const double* z, double* a, int64_t n);
using EluBackwardFn = void (*)(const double* a, const double* g, double* dz,
                               int64_t n);
using AddBiasFn = void (*)(double* a, const double* bias, int rows, int64_t cols,
                           int64_t lda);

struct Kernels {
  MicrokernelFn microkernel = nullptr;
  EluFn elu = nullptr;
  EluBackwardFn elu_backward = nullptr;
  AddBiasFn add_bias = nullptr;
};

Kernels scalar_kernels();
bool avx2_supported();
Kernels avx2_kernels();
bool avx512_supported();
Kernels avx512_kernels();
#if defined(__aarch64__)
Kernels neon_kernels();
#endif

// Shared expm1 polynomial (Cody-Waite reduction + degree-13 Taylor, valid for
// z <= 0 after clamping at -708).  Every ISA evaluates the same fma sequence.
inline constexpr double kLog2e = 1.4426950408889634074;
inline constexpr double kLn2Hi = 6.93147180369123816490e-01;
inline constexpr double kLn2Lo = 1.90821492927058770002e-10;
inline constexpr double kExpClampLo = -708.0;
inline constexpr int kExpDegree = 13;
inline constexpr double kExpC[kExpDegree + 1] = {
    1.0,
    1.0,
    0.5,
    1.6666666666666666667e-1,
    4.1666666666666666667e-2,
    8.3333333333333333333e-3,
    1.3888888888888888889e-3,
    1.9841269841269841270e-4,
    2.4801587301587301587e-5,
    2.7557319223985890653e-6,
    2.7557319223985890653e-7,
    2.5052108385441718775e-8,
    2.0876756987868098979e-9,
    1.6059043836821614599e-10,
};

}  // namespace sjrp::simd::detail
