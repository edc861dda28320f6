// Compiled with -mavx2 (no -mfma): mul and add stay separate instructions so
// every lane rounds exactly like the scalar loop.

#include <immintrin.h>

#include "kernels_impl.hpp"

namespace rot::kernels::detail {

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(vy, prod));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void add_avx2(const double* x, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) y[i] += x[i];
}

void scale_avx2(double a, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(y + i), va));
  for (; i < n; ++i) y[i] *= a;
}

void matvec_avx2(const double* x, const double* w, std::size_t rows, std::size_t cols,
                 double* y) {
  // Lanes span output columns; each column still accumulates over rows in
  // order. Blocks of 16 columns keep four accumulators in registers.
  std::size_t o = 0;
  for (; o + 16 <= cols; o += 16) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    __m256d acc2 = _mm256_setzero_pd();
    __m256d acc3 = _mm256_setzero_pd();
    for (std::size_t i = 0; i < rows; ++i) {
      const __m256d xi = _mm256_set1_pd(x[i]);
      const double* row = w + i * cols + o;
      acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(xi, _mm256_loadu_pd(row)));
      acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(xi, _mm256_loadu_pd(row + 4)));
      acc2 = _mm256_add_pd(acc2, _mm256_mul_pd(xi, _mm256_loadu_pd(row + 8)));
      acc3 = _mm256_add_pd(acc3, _mm256_mul_pd(xi, _mm256_loadu_pd(row + 12)));
    }
    _mm256_storeu_pd(y + o, acc0);
    _mm256_storeu_pd(y + o + 4, acc1);
    _mm256_storeu_pd(y + o + 8, acc2);
    _mm256_storeu_pd(y + o + 12, acc3);
  }
  for (; o + 4 <= cols; o += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < rows; ++i) {
      acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(x[i]),
                                             _mm256_loadu_pd(w + i * cols + o)));
    }
    _mm256_storeu_pd(y + o, acc);
  }
  for (; o < cols; ++o) {
    double acc = 0.0;
    for (std::size_t i = 0; i < rows; ++i) acc += x[i] * w[i * cols + o];
    y[o] = acc;
  }
}

void rank1_avx2(const double* r, double* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) axpy_avx2(r[i], r, c + i * n, n);
}

}  // namespace rot::kernels::detail
