#pragma once

#include <cstddef>

#include "rot/kernels.hpp"

namespace rot::kernels::detail {

void axpy_scalar(double a, const double* x, double* y, std::size_t n);
void add_scalar(const double* x, double* y, std::size_t n);
void scale_scalar(double a, double* y, std::size_t n);
void matvec_scalar(const double* x, const double* w, std::size_t rows, std::size_t cols,
                   double* y);
void rank1_scalar(const double* r, double* c, std::size_t n);

#if defined(ROT_HAVE_AVX2)
void axpy_avx2(double a, const double* x, double* y, std::size_t n);
void add_avx2(const double* x, double* y, std::size_t n);
void scale_avx2(double a, double* y, std::size_t n);
void matvec_avx2(const double* x, const double* w, std::size_t rows, std::size_t cols,
                 double* y);
void rank1_avx2(const double* r, double* c, std::size_t n);
#endif

#if defined(ROT_HAVE_NEON)
void axpy_neon(double a, const double* x, double* y, std::size_t n);
void add_neon(const double* x, double* y, std::size_t n);
void scale_neon(double a, double* y, std::size_t n);
void matvec_neon(const double* x, const double* w, std::size_t rows, std::size_t cols,
                 double* y);
void rank1_neon(const double* r, double* c, std::size_t n);
#endif

}  // namespace rot::kernels::detail
