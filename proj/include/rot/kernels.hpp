#pragma once

// Data-parallel double-precision kernels used by the transformer and the
// covariance accumulation. Each kernel has a scalar reference version and
// SIMD variants (AVX2 on x86-64, NEON on AArch64) picked once at runtime.
//
// All variants are bit-identical to the scalar reference: lanes only ever
// run independent element-wise chains (multiply, then add, never fused), so
// no reduction is reordered. Reductions across an index (dot products) stay
// scalar and left-to-right; see rot::linalg::dot.

#include <cstddef>
#include <span>
#include <string_view>

namespace rot::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa) noexcept;

struct KernelTable {
  Isa isa;
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // y[i] += x[i]
  void (*add)(const double* x, double* y, std::size_t n);
  // y[i] *= a
  void (*scale)(double a, double* y, std::size_t n);
  // y[o] = sum_i x[i] * w[i * cols + o], accumulated over i in order.
  void (*matvec)(const double* x, const double* w, std::size_t rows, std::size_t cols,
                 double* y);
  // c[i * n + j] += r[i] * r[j]
  void (*rank1)(const double* r, double* c, std::size_t n);
};

const KernelTable& scalar_table() noexcept;
// nullptr when the variant was not compiled in or the CPU lacks support.
const KernelTable* avx2_table() noexcept;
const KernelTable* neon_table() noexcept;

// Best table for this CPU. ROT_KERNELS=scalar in the environment forces the
// scalar reference (read once, on first call).
const KernelTable& active() noexcept;

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), y.size());
}
inline void add(std::span<const double> x, std::span<double> y) {
  active().add(x.data(), y.data(), y.size());
}
inline void scale(double a, std::span<double> y) { active().scale(a, y.data(), y.size()); }
inline void matvec(std::span<const double> x, const double* w, std::size_t cols,
                   std::span<double> y) {
  active().matvec(x.data(), w, x.size(), cols, y.data());
}
inline void rank1(std::span<const double> r, std::span<double> c) {
  active().rank1(r.data(), c.data(), r.size());
}

}  // namespace rot::kernels
