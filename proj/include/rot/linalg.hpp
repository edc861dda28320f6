#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rot::linalg {

using Vector = std::vector<double>;

// Dense row-major collection of equally sized sample rows.
class SampleMatrix {
 public:
  SampleMatrix() = default;
  // Throws DimensionMismatch for ragged rows, NonFinite for NaN/Inf entries.
  explicit SampleMatrix(const std::vector<Vector>& rows);
  SampleMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  const std::vector<double>& data() const noexcept { return data_; }

  void append_row(std::span<const double> values);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Left-to-right sum of products; the order is fixed so results are
// reproducible bit for bit.
double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double cosine(std::span<const double> a, std::span<const double> b);
Vector normalized(std::span<const double> a);

void require_finite(std::span<const double> a);

// Sample covariance (d x d, row-major). Mean-centered with 1/(n-1)
// normalisation when center is set, otherwise the raw second moment / n.
std::vector<double> covariance(const SampleMatrix& samples, bool center);

struct SymmetricEigen {
  std::size_t n = 0;
  std::vector<double> values;   // unsorted, diagonal order
  std::vector<double> vectors;  // column k (vectors[i * n + k]) pairs with values[k]
  int sweeps = 0;
};

// Cyclic Jacobi rotations on a symmetric n x n row-major matrix. Stops once
// the off-diagonal Frobenius norm drops below 1e-12 * |trace| (or 100 sweeps).
SymmetricEigen jacobi_eigen(std::vector<double> matrix, std::size_t n);

struct PrincipalComponent {
  Vector direction;             // unit L2 norm
  double eigenvalue = 0.0;      // variance along direction
  double total_variance = 0.0;  // trace of the covariance
  double explained_share() const {
    return total_variance > 0.0 ? eigenvalue / total_variance : 0.0;
  }
};

// Leading eigenvector of the sample covariance. For fewer rows than columns
// the eigenproblem is solved on the Gram matrix and mapped back, which gives
// the same direction at a fraction of the cost.
PrincipalComponent principal_component_full(const SampleMatrix& samples, bool center);
Vector principal_component(const SampleMatrix& samples, bool center);

}  // namespace rot::linalg
