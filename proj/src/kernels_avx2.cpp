// Compiled with -mavx2 -mfma. Only reachable after the dispatcher has
// confirmed CPU support.

#include "scagan/kernels.hpp"

#include <immintrin.h>

namespace scagan::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

// 4x8 register tile: four rows of A broadcast against two 4-lane columns of B.
inline void tile_4x8(int k, const double* a, std::ptrdiff_t a_rs, std::ptrdiff_t a_cs,
                     const double* b, std::ptrdiff_t ldb, double* c, std::ptrdiff_t ldc) {
  __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
  __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
  __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
  __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
  const double* a0 = a;
  const double* a1 = a + a_rs;
  const double* a2 = a + 2 * a_rs;
  const double* a3 = a + 3 * a_rs;
  for (int p = 0; p < k; ++p) {
    const double* bp = b + p * ldb;
    const __m256d b0 = _mm256_loadu_pd(bp);
    const __m256d b1 = _mm256_loadu_pd(bp + 4);
    const std::ptrdiff_t off = p * a_cs;
    __m256d av = _mm256_broadcast_sd(a0 + off);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(a1 + off);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(a2 + off);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(a3 + off);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  auto flush = [](double* dst, __m256d lo, __m256d hi) {
    _mm256_storeu_pd(dst, _mm256_add_pd(_mm256_loadu_pd(dst), lo));
    _mm256_storeu_pd(dst + 4, _mm256_add_pd(_mm256_loadu_pd(dst + 4), hi));
  };
  flush(c, c00, c01);
  flush(c + ldc, c10, c11);
  flush(c + 2 * ldc, c20, c21);
  flush(c + 3 * ldc, c30, c31);
}

// Single row of A against 8-wide column blocks, with a scalar tail.
inline void row_kernel(int n, int k, const double* a, std::ptrdiff_t a_cs, const double* b,
                       std::ptrdiff_t ldb, double* c, int j0) {
  int j = j0;
  for (; j + 8 <= n; j += 8) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    for (int p = 0; p < k; ++p) {
      const __m256d av = _mm256_broadcast_sd(a + p * a_cs);
      acc0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * ldb + j), acc0);
      acc1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * ldb + j + 4), acc1);
    }
    _mm256_storeu_pd(c + j, _mm256_add_pd(_mm256_loadu_pd(c + j), acc0));
    _mm256_storeu_pd(c + j + 4, _mm256_add_pd(_mm256_loadu_pd(c + j + 4), acc1));
  }
  for (; j + 4 <= n; j += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (int p = 0; p < k; ++p) {
      acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p * a_cs), _mm256_loadu_pd(b + p * ldb + j),
                            acc);
    }
    _mm256_storeu_pd(c + j, _mm256_add_pd(_mm256_loadu_pd(c + j), acc));
  }
  for (; j < n; ++j) {
    double s = 0.0;
    for (int p = 0; p < k; ++p) s += a[p * a_cs] * b[p * ldb + j];
    c[j] += s;
  }
}

void gemm_avx2(int m, int n, int k, const double* a, std::ptrdiff_t a_rs, std::ptrdiff_t a_cs,
               const double* b, std::ptrdiff_t ldb, double* c, std::ptrdiff_t ldc) {
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    const double* ai = a + i * a_rs;
    double* ci = c + i * ldc;
    int j = 0;
    for (; j + 8 <= n; j += 8) tile_4x8(k, ai, a_rs, a_cs, b + j, ldb, ci + j, ldc);
    if (j < n) {
      for (int r = 0; r < 4; ++r) row_kernel(n, k, ai + r * a_rs, a_cs, b, ldb, ci + r * ldc, j);
    }
  }
  for (; i < m; ++i) row_kernel(n, k, a + i * a_rs, a_cs, b, ldb, c + i * ldc, 0);
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void gemm_abt_avx2(int m, int n, int k, const double* a, std::ptrdiff_t lda, const double* b,
                   std::ptrdiff_t ldb, double* c, std::ptrdiff_t ldc) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      c[i * ldc + j] += dot_avx2(a + i * lda, b + j * ldb, static_cast<std::size_t>(k));
    }
  }
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

constexpr KernelTable kAvx2{gemm_avx2, gemm_abt_avx2, dot_avx2, axpy_avx2};

}  // namespace

const KernelTable& avx2_table() noexcept { return kAvx2; }

}  // namespace scagan::kernels
