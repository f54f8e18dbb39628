#include <cstdlib>
#include <string_view>

#include "srcv/simd/kernels.hpp"

namespace srcv::simd {

bool cpu_supports_avx2() noexcept {
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const KernelTable& select_kernels() noexcept {
  if (const char* forced = std::getenv("SRCV_KERNELS")) {
    if (std::string_view(forced) == "scalar") return scalar_kernels();
  }
  if (const KernelTable* avx2 = avx2_kernels(); avx2 != nullptr && cpu_supports_avx2()) {
    return *avx2;
  }
  return scalar_kernels();
}

}  // namespace

const KernelTable& active_kernels() noexcept {
  static const KernelTable& table = select_kernels();
  return table;
}

}  // namespace srcv::simd
