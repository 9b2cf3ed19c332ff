#include "scagan/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace scagan::kernels {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(SCAGAN_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend detect() noexcept {
  if (const char* env = std::getenv("SCAGAN_KERNELS")) {
    if (std::string(env) == "scalar") return Backend::Scalar;
  }
  return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& current() noexcept {
  static std::atomic<Backend> backend{detect()};
  return backend;
}

}  // namespace

std::string_view backend_name(Backend b) noexcept {
  switch (b) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
  }
  return "unknown";
}

bool backend_available(Backend b) noexcept {
  return b == Backend::Scalar || (b == Backend::Avx2 && cpu_has_avx2());
}

Backend active_backend() noexcept { return current().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (!backend_available(b)) {
    throw std::runtime_error("kernel backend '" + std::string(backend_name(b)) +
                             "' is not supported on this CPU");
  }
  current().store(b, std::memory_order_relaxed);
}

const KernelTable& active() noexcept {
#if defined(SCAGAN_HAVE_AVX2)
  if (active_backend() == Backend::Avx2) return avx2_table();
#endif
  return scalar_table();
}

}  // namespace scagan::kernels
