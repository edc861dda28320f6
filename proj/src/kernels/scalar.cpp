#include "kernels_impl.hpp"

namespace rot::kernels::detail {

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add_scalar(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void scale_scalar(double a, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= a;
}

void matvec_scalar(const double* x, const double* w, std::size_t rows, std::size_t cols,
                   double* y) {
  for (std::size_t o = 0; o < cols; ++o) y[o] = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const double xi = x[i];
    const double* row = w + i * cols;
    for (std::size_t o = 0; o < cols; ++o) y[o] += xi * row[o];
  }
}

void rank1_scalar(const double* r, double* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double ri = r[i];
    double* row = c + i * n;
    for (std::size_t j = 0; j < n; ++j) row[j] += ri * r[j];
  }
}

}  // namespace rot::kernels::detail
