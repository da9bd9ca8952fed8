#pragma once

#include <cstddef>
#include <string_view>

namespace volt::simd {

// Inner-loop kernels over contiguous double arrays. Every instruction-set
// variant fills the same table; callers go through active() and never name an
// ISA directly.
struct KernelTable {
  std::string_view name;

  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);

  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  // c[m x n] (+)= a[m x k] * b[k x n], all row-major and densely packed.
  // When accumulate is false c is overwritten.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a,
               const double* b, double* c, bool accumulate);
};

const KernelTable& scalar_kernels();

// Nullptr when the binary was built without the variant or the CPU lacks it.
const KernelTable* avx2_kernels();

// The table used by tensor arithmetic. Chosen once at first use: AVX2+FMA when
// the CPU supports it, scalar otherwise. VOLT_SIMD=scalar forces the reference.
const KernelTable& active();

}  // namespace volt::simd
