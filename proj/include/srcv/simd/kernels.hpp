#pragma once

// Double-precision vector kernels behind a runtime-selected dispatch table.
//
// Every kernel has a portable scalar reference. An AVX2+FMA variant is
// compiled in its own translation unit and chosen at startup when the CPU
// reports both features. Set SRCV_KERNELS=scalar to force the reference
// path. Variants may differ in summation order, so results agree to
// rounding, not bit-for-bit; within one process the choice is fixed.

#include <cstddef>
#include <span>

namespace srcv::simd {

struct KernelTable {
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;

// nullptr when the variant was not compiled for this target.
const KernelTable* avx2_kernels() noexcept;

bool cpu_supports_avx2() noexcept;

// The table every caller uses. Selected once, on first call.
const KernelTable& active_kernels() noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active_kernels().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active_kernels().axpy(alpha, x.data(), y.data(), x.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active_kernels().squared_distance(a.data(), b.data(), a.size());
}

inline double sum(std::span<const double> a) { return active_kernels().sum(a.data(), a.size()); }

}  // namespace srcv::simd
