#include "rot/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rot/error.hpp"
#include "rot/kernels.hpp"

namespace rot::linalg {

SampleMatrix::SampleMatrix(const std::vector<Vector>& rows) {
  for (const auto& r : rows) append_row(r);
}

SampleMatrix::SampleMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(Errc::DimensionMismatch, "sample buffer size does not match rows x cols");
  }
  require_finite(data_);
}

void SampleMatrix::append_row(std::span<const double> values) {
  if (rows_ == 0) {
    cols_ = values.size();
  } else if (values.size() != cols_) {
    throw Error(Errc::DimensionMismatch, "row of length " + std::to_string(values.size()) +
                                             " in matrix of width " + std::to_string(cols_));
  }
  require_finite(values);
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

void require_finite(std::span<const double> a) {
  for (double v : a) {
    if (!std::isfinite(v)) throw Error(Errc::NonFinite, "non-finite entry");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(Errc::DimensionMismatch,
                "dot of lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::DimensionMismatch, "cosine of unequal lengths");
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw Error(Errc::ZeroVector, "cosine with a zero vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

Vector normalized(std::span<const double> a) {
  const double n = norm(a);
  if (n == 0.0) throw Error(Errc::ZeroVector, "cannot normalise a zero vector");
  Vector out(a.begin(), a.end());
  for (double& v : out) v /= n;
  return out;
}

namespace {

Vector column_mean(const SampleMatrix& s) {
  Vector mean(s.cols(), 0.0);
  for (std::size_t i = 0; i < s.rows(); ++i) kernels::add(s.row(i), mean);
  kernels::scale(1.0 / static_cast<double>(s.rows()), mean);
  return mean;
}

SampleMatrix prepared(const SampleMatrix& s, bool center) {
  if (!center) return s;
  const Vector mean = column_mean(s);
  std::vector<double> data(s.data());
  for (std::size_t i = 0; i < s.rows(); ++i) {
    kernels::axpy(-1.0, mean, std::span<double>(data.data() + i * s.cols(), s.cols()));
  }
  return SampleMatrix(s.rows(), s.cols(), std::move(data));
}

double denominator(const SampleMatrix& s, bool center) {
  return center ? static_cast<double>(s.rows() - 1) : static_cast<double>(s.rows());
}

}  // namespace

std::vector<double> covariance(const SampleMatrix& samples, bool center) {
  if (samples.rows() < (center ? 2u : 1u)) {
    throw Error(Errc::DegenerateInput, "too few rows for a covariance");
  }
  const SampleMatrix x = prepared(samples, center);
  const std::size_t d = x.cols();
  std::vector<double> c(d * d, 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) kernels::rank1(x.row(i), c);
  kernels::scale(1.0 / denominator(samples, center), c);
  return c;
}

SymmetricEigen jacobi_eigen(std::vector<double> a, std::size_t n) {
  if (a.size() != n * n) throw Error(Errc::DimensionMismatch, "jacobi_eigen: matrix is not n x n");
  SymmetricEigen out;
  out.n = n;
  out.vectors.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) out.vectors[i * n + i] = 1.0;

  double trace = 0.0;
  double frob = 0.0;
  for (std::size_t i = 0; i < n; ++i) trace += a[i * n + i];
  for (double v : a) frob += v * v;
  const double scale_ref = std::abs(trace) > 0.0 ? std::abs(trace) : std::sqrt(frob);
  const double tol = 1e-12 * scale_ref;

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += a[i * n + j] * a[i * n + j];
    return std::sqrt(s);
  };

  constexpr int kMaxSweeps = 100;
  while (out.sweeps < kMaxSweeps && off_norm() >= tol && tol > 0.0) {
    ++out.sweeps;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double app = a[p * n + p];
        const double aqq = a[q * n + q];
        // Rotation angle that zeroes a[p][q] (Golub & Van Loan, sym.schur2).
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = out.vectors[k * n + p];
          const double vkq = out.vectors[k * n + q];
          out.vectors[k * n + p] = c * vkp - s * vkq;
          out.vectors[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = a[i * n + i];
  return out;
}

namespace {

std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace

PrincipalComponent principal_component_full(const SampleMatrix& samples, bool center) {
  if (samples.rows() < 2) throw Error(Errc::DegenerateInput, "principal component needs >= 2 rows");
  if (samples.cols() < 1) throw Error(Errc::DimensionMismatch, "rows have zero length");

  const SampleMatrix x = prepared(samples, center);
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  const double denom = denominator(samples, center);

  PrincipalComponent pc;
  if (d <= n) {
    std::vector<double> c(d * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) kernels::rank1(x.row(i), c);
    kernels::scale(1.0 / denom, c);
    for (std::size_t i = 0; i < d; ++i) pc.total_variance += c[i * d + i];
    if (!(pc.total_variance > 0.0)) {
      throw Error(Errc::DegenerateInput, "zero covariance (all rows identical)");
    }
    const SymmetricEigen eig = jacobi_eigen(std::move(c), d);
    const std::size_t k = argmax(eig.values);
    pc.eigenvalue = eig.values[k];
    pc.direction.resize(d);
    for (std::size_t i = 0; i < d; ++i) pc.direction[i] = eig.vectors[i * d + k];
  } else {
    std::vector<double> g(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) g[i * n + j] = g[j * n + i] = dot(x.row(i), x.row(j)) / denom;
    for (std::size_t i = 0; i < n; ++i) pc.total_variance += g[i * n + i];
    if (!(pc.total_variance > 0.0)) {
      throw Error(Errc::DegenerateInput, "zero covariance (all rows identical)");
    }
    const SymmetricEigen eig = jacobi_eigen(std::move(g), n);
    const std::size_t k = argmax(eig.values);
    pc.eigenvalue = eig.values[k];
    pc.direction.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) kernels::axpy(eig.vectors[i * n + k], x.row(i), pc.direction);
  }
  pc.direction = normalized(pc.direction);
  return pc;
}

Vector principal_component(const SampleMatrix& samples, bool center) {
  return principal_component_full(samples, center).direction;
}

}  // namespace rot::linalg
