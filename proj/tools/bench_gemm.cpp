// Quick throughput probe for the training-relevant GEMM shapes.
#include <chrono>
#include <cstdio>
#include <vector>

#include "sjrp/core.hpp"
#include "sjrp/parallel.hpp"
#include "sjrp/simd.hpp"

using namespace sjrp;

static void bench(int m, int n, int k, int reps) {
  RandomStream rng(99);
  std::vector<double> a(static_cast<size_t>(m) * k), b(static_cast<size_t>(k) * n),
      c(static_cast<size_t>(m) * n);
  for (auto& v : a) v = rng.uniform() - 0.5;
  for (auto& v : b) v = rng.uniform() - 0.5;
  std::vector<double> apack;
  simd::pack_a(a.data(), m, k, k, apack);
  simd::gemm_packed(apack.data(), m, k, b.data(), n, c.data(), n, n, false);
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r)
    simd::gemm_packed(apack.data(), m, k, b.data(), n, c.data(), n, n, false);
  const auto t1 = std::chrono::steady_clock::now();
  const double sec = std::chrono::duration<double>(t1 - t0).count();
  const double gf = 2.0 * m * n * k * reps / sec / 1e9;
  std::printf("%-22s m=%5d n=%6d k=%5d  %7.2f GF/s (%.3f s)\n",
              simd::isa_name(simd::active_isa()), m, n, k, gf, sec);
}

int main() {
  std::printf("threads=%d best_isa=%s\n", parallel::threads(),
              simd::isa_name(simd::detect_best_isa()));
  bench(500, 512, 500, 40);
  bench(500, 2048, 500, 10);
  bench(500, 8192, 500, 4);
  bench(250, 2048, 250, 30);
  bench(1000, 2048, 1000, 4);
  simd::set_active_isa(simd::Isa::avx2);
  bench(500, 2048, 500, 10);
  simd::set_active_isa(simd::Isa::scalar);
  bench(500, 512, 500, 1);
  return 0;
}
