#pragma once

// Dense arithmetic kernels behind the convolution and matrix ops.
//
// Every kernel has a portable scalar reference and an AVX2/FMA variant. The
// variant is picked once at startup from CPUID; SCAGAN_KERNELS=scalar forces
// the reference path. Results of the two paths agree to rounding, not bitwise
// (FMA contraction and lane-wise summation change the rounding sequence).

#include <cstddef>
#include <string_view>

namespace scagan::kernels {

enum class Backend { Scalar, Avx2 };

std::string_view backend_name(Backend b) noexcept;

struct KernelTable {
  // C[i,j] += sum_k A[i*a_rs + k*a_cs] * B[k*ldb + j]
  void (*gemm)(int m, int n, int k, const double* a, std::ptrdiff_t a_rs, std::ptrdiff_t a_cs,
               const double* b, std::ptrdiff_t ldb, double* c, std::ptrdiff_t ldc);
  // C[i,j] += sum_k A[i*lda + k] * B[j*ldb + k]
  void (*gemm_abt)(int m, int n, int k, const double* a, std::ptrdiff_t lda, const double* b,
                   std::ptrdiff_t ldb, double* c, std::ptrdiff_t ldc);
  double (*dot)(const double* x, const double* y, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

const KernelTable& scalar_table() noexcept;
const KernelTable& avx2_table() noexcept;  // defined only when compiled for x86-64

bool backend_available(Backend b) noexcept;
Backend active_backend() noexcept;
/// Throws std::runtime_error if the backend is unavailable on this CPU.
void set_backend(Backend b);
const KernelTable& active() noexcept;

/// Restores the previous backend on scope exit.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend b) : previous_(active_backend()) { set_backend(b); }
  ~ScopedBackend() { set_backend(previous_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

inline void gemm(int m, int n, int k, const double* a, std::ptrdiff_t a_rs, std::ptrdiff_t a_cs,
                 const double* b, std::ptrdiff_t ldb, double* c, std::ptrdiff_t ldc) {
  active().gemm(m, n, k, a, a_rs, a_cs, b, ldb, c, ldc);
}
inline void gemm_abt(int m, int n, int k, const double* a, std::ptrdiff_t lda, const double* b,
                     std::ptrdiff_t ldb, double* c, std::ptrdiff_t ldc) {
  active().gemm_abt(m, n, k, a, lda, b, ldb, c, ldc);
}
inline double dot(const double* x, const double* y, std::size_t n) { return active().dot(x, y, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}

}  // namespace scagan::kernels
