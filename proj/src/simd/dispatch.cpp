#include <cstdlib>
#include <string_view>

#include "volt/simd/kernels.hpp"

namespace volt::simd {

#if defined(VOLT_HAVE_AVX2)
namespace detail {
const KernelTable& avx2_table();
}
#endif

const KernelTable* avx2_kernels() {
#if defined(VOLT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  if (supported) return &detail::avx2_table();
#endif
  return nullptr;
}

const KernelTable& active() {
  static const KernelTable& chosen = [] () -> const KernelTable& {
    const char* forced = std::getenv("VOLT_SIMD");
    if (forced != nullptr && std::string_view(forced) == "scalar") return scalar_kernels();
    if (const KernelTable* avx2 = avx2_kernels()) return *avx2;
    return scalar_kernels();
  }();
  return chosen;
}

}  // namespace volt::simd
