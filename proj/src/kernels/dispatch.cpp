#include <cstdlib>
#include <string_view>

#include "kernels_impl.hpp"

namespace rot::kernels {

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

const KernelTable& scalar_table() noexcept {
  static const KernelTable table{Isa::Scalar,         detail::axpy_scalar, detail::add_scalar,
                                 detail::scale_scalar, detail::matvec_scalar,
                                 detail::rank1_scalar};
  return table;
}

const KernelTable* avx2_table() noexcept {
#if defined(ROT_HAVE_AVX2)
  static const KernelTable table{Isa::Avx2,         detail::axpy_avx2,   detail::add_avx2,
                                 detail::scale_avx2, detail::matvec_avx2, detail::rank1_avx2};
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") != 0;
  }();
  return supported ? &table : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_table() noexcept {
#if defined(ROT_HAVE_NEON)
  static const KernelTable table{Isa::Neon,         detail::axpy_neon,   detail::add_neon,
                                 detail::scale_neon, detail::matvec_neon, detail::rank1_neon};
  return &table;
#else
  return nullptr;
#endif
}

const KernelTable& active() noexcept {
  static const KernelTable& chosen = []() -> const KernelTable& {
    const char* env = std::getenv("ROT_KERNELS");
    if (env != nullptr && std::string_view(env) == "scalar") return scalar_table();
    if (const auto* t = avx2_table()) return *t;
    if (const auto* t = neon_table()) return *t;
    return scalar_table();
  }();
  return chosen;
}

}  // namespace rot::kernels
