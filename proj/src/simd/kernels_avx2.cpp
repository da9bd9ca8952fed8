// Compiled with -mavx2 -mfma. Only reachable through avx2_kernels() after the
// runtime CPU check in dispatch.cpp.
#include <immintrin.h>

#include <algorithm>
#include <cstddef>

#include "volt/simd/kernels.hpp"

namespace volt::simd::detail {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// 4x8 register tile: c[i0..i0+4, j0..j0+8] += a[i0.., :] * b[:, j0..].
inline void tile_4x8(std::size_t n, std::size_t k, const double* a, const double* b,
                     double* c) {
  __m256d c00 = _mm256_loadu_pd(c + 0 * n), c01 = _mm256_loadu_pd(c + 0 * n + 4);
  __m256d c10 = _mm256_loadu_pd(c + 1 * n), c11 = _mm256_loadu_pd(c + 1 * n + 4);
  __m256d c20 = _mm256_loadu_pd(c + 2 * n), c21 = _mm256_loadu_pd(c + 2 * n + 4);
  __m256d c30 = _mm256_loadu_pd(c + 3 * n), c31 = _mm256_loadu_pd(c + 3 * n + 4);
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * n);
    const __m256d b1 = _mm256_loadu_pd(b + p * n + 4);
    __m256d av = _mm256_broadcast_sd(a + 0 * k + p);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(a + 1 * k + p);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(a + 2 * k + p);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(a + 3 * k + p);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  _mm256_storeu_pd(c + 0 * n, c00);
  _mm256_storeu_pd(c + 0 * n + 4, c01);
  _mm256_storeu_pd(c + 1 * n, c10);
  _mm256_storeu_pd(c + 1 * n + 4, c11);
  _mm256_storeu_pd(c + 2 * n, c20);
  _mm256_storeu_pd(c + 2 * n + 4, c21);
  _mm256_storeu_pd(c + 3 * n, c30);
  _mm256_storeu_pd(c + 3 * n + 4, c31);
}

void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
               const double* b, double* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  const std::size_t m4 = m - m % 4;
  const std::size_t n8 = n - n % 8;
  for (std::size_t i = 0; i < m4; i += 4) {
    for (std::size_t j = 0; j < n8; j += 8) {
      tile_4x8(n, k, a + i * k, b + j, c + i * n + j);
    }
  }
  // Column tail for the tiled rows, then the leftover rows in full.
  if (n8 < n) {
    for (std::size_t i = 0; i < m4; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        axpy_avx2(a[i * k + p], b + p * n + n8, c + i * n + n8, n - n8);
      }
    }
  }
  for (std::size_t i = m4; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      axpy_avx2(a[i * k + p], b + p * n, c + i * n, n);
    }
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{"avx2", &dot_avx2, &axpy_avx2, &gemm_avx2};
  return table;
}

}  // namespace volt::simd::detail
