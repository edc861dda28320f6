#include <arm_neon.h>

#include "kernels_impl.hpp"

namespace rot::kernels::detail {

// vmulq/vaddq rather than vfmaq: the scalar reference rounds twice.

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void add_neon(const double* x, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += x[i];
}

void scale_neon(double a, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmulq_f64(vld1q_f64(y + i), va));
  for (; i < n; ++i) y[i] *= a;
}

void matvec_neon(const double* x, const double* w, std::size_t rows, std::size_t cols,
                 double* y) {
  std::size_t o = 0;
  for (; o + 2 <= cols; o += 2) {
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t i = 0; i < rows; ++i) {
      acc = vaddq_f64(acc, vmulq_f64(vdupq_n_f64(x[i]), vld1q_f64(w + i * cols + o)));
    }
    vst1q_f64(y + o, acc);
  }
  for (; o < cols; ++o) {
    double acc = 0.0;
    for (std::size_t i = 0; i < rows; ++i) acc += x[i] * w[i * cols + o];
    y[o] = acc;
  }
}

void rank1_neon(const double* r, double* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) axpy_neon(r[i], r, c + i * n, n);
}

}  // namespace rot::kernels::detail
