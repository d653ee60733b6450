#ifndef MLPTEST_LINALG_HPP_
#define MLPTEST_LINALG_HPP_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace mlptest {

using Vector = std::vector<double>;

// Dense row-major matrix. Only meant for the small sizes used here
// (output dimension, parameter count), never for n x n data.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t dim);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double &operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  const std::vector<double> &data() const { return data_; }
  std::vector<double> &data() { return data_; }

  Matrix transpose() const;

  friend bool operator==(const Matrix &, const Matrix &) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix &a, const Matrix &b);
Matrix operator+(const Matrix &a, const Matrix &b);
Matrix operator-(const Matrix &a, const Matrix &b);
Matrix operator*(double c, const Matrix &a);
Vector operator*(const Matrix &a, std::span<const double> x);

// Square matrix whose (i,j) and (j,i) entries are always bitwise equal.
// Construction from a general matrix averages it with its transpose.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t dim, double fill = 0.0);
  explicit SymMatrix(const Matrix &m);
  SymMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static SymMatrix identity(std::size_t dim);
  static SymMatrix diagonal(std::span<const double> diag);

  std::size_t dim() const { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  void set(std::size_t i, std::size_t j, double v) {
    m_(i, j) = v;
    m_(j, i) = v;
  }

  const Matrix &matrix() const { return m_; }
  double max_diagonal() const;

  friend bool operator==(const SymMatrix &, const SymMatrix &) = default;

 private:
  Matrix m_;
};

class CholeskyFactor {
 public:
  std::size_t dim() const { return lower_.rows(); }
  const Matrix &lower() const { return lower_; }

  // Solves (L L^T) x = b.
  Vector solve(std::span<const double> b) const;

 private:
  friend CholeskyFactor cholesky(const SymMatrix &m);
  explicit CholeskyFactor(Matrix lower) : lower_(std::move(lower)) {}
  Matrix lower_;
};

// Throws NotPositiveDefinite(j) when pivot j is <= 1e-12 * max diagonal.
CholeskyFactor cholesky(const SymMatrix &m);

double logdet(const CholeskyFactor &f);

SymMatrix spd_inverse(const CholeskyFactor &f);

// sum_{i,j} a(i,j) * b(j,i), i.e. tr(a b) without forming the product.
double trace_product(const Matrix &a, const Matrix &b);
double trace_product(const SymMatrix &a, const Matrix &b);

// (1/n) sum_t r_t r_t^T over the rows of `rows`. Not mean-centered.
SymMatrix sample_covariance(const Matrix &rows);

// Eigenvalues in ascending order (cyclic Jacobi).
Vector symmetric_eigenvalues(const SymMatrix &m);

double frobenius_norm(const Matrix &m);

}  // namespace mlptest

#endif  // MLPTEST_LINALG_HPP_
