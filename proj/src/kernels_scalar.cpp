#include "scagan/kernels.hpp"

namespace scagan::kernels {
namespace {

void gemm_scalar(int m, int n, int k, const double* a, std::ptrdiff_t a_rs, std::ptrdiff_t a_cs,
                 const double* b, std::ptrdiff_t ldb, double* c, std::ptrdiff_t ldc) {
  for (int i = 0; i < m; ++i) {
    double* crow = c + i * ldc;
    for (int p = 0; p < k; ++p) {
      const double av = a[i * a_rs + p * a_cs];
      if (av == 0.0) continue;
      const double* brow = b + p * ldb;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void gemm_abt_scalar(int m, int n, int k, const double* a, std::ptrdiff_t lda, const double* b,
                     std::ptrdiff_t ldb, double* c, std::ptrdiff_t ldc) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      c[i * ldc + j] += dot_scalar(a + i * lda, b + j * ldb, static_cast<std::size_t>(k));
    }
  }
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

constexpr KernelTable kScalar{gemm_scalar, gemm_abt_scalar, dot_scalar, axpy_scalar};

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

}  // namespace scagan::kernels
