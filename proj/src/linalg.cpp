#include "mlptest/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "mlptest/errors.hpp"

namespace mlptest {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto &r : rows) {
    if (r.size() != cols_) {
      throw DimensionMismatch("ragged matrix initializer");
    }
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t dim) {
  Matrix m(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix operator*(const Matrix &a, const Matrix &b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("matrix product");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

namespace {

void require_same_shape(const Matrix &a, const Matrix &b, const char *what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch(what);
}

}  // namespace

Matrix operator+(const Matrix &a, const Matrix &b) {
  require_same_shape(a, b, "matrix sum");
  Matrix c = a;
  for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] += b.data()[i];
  return c;
}

Matrix operator-(const Matrix &a, const Matrix &b) {
  require_same_shape(a, b, "matrix difference");
  Matrix c = a;
  for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

Matrix operator*(double s, const Matrix &a) {
  Matrix c = a;
  for (auto &v : c.data()) v *= s;
  return c;
}

Vector operator*(const Matrix &a, std::span<const double> x) {
  if (a.cols() != x.size()) throw DimensionMismatch("matrix-vector product");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
    y[i] = acc;
  }
  return y;
}

SymMatrix::SymMatrix(std::size_t dim, double fill) : m_(dim, dim, fill) {}

SymMatrix::SymMatrix(const Matrix &m) : m_(m.rows(), m.cols()) {
  if (m.rows() != m.cols()) throw DimensionMismatch("symmetric matrix must be square");
  for (std::size_t i = 0; i < m.rows(); ++i) {
    m_(i, i) = m(i, i);
    for (std::size_t j = 0; j < i; ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      m_(i, j) = v;
      m_(j, i) = v;
    }
  }
}

SymMatrix::SymMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : SymMatrix(Matrix(rows)) {}

SymMatrix SymMatrix::identity(std::size_t dim) { return SymMatrix(Matrix::identity(dim)); }

SymMatrix SymMatrix::diagonal(std::span<const double> diag) {
  SymMatrix s(diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) s.set(i, i, diag[i]);
  return s;
}

double SymMatrix::max_diagonal() const {
  double m = 0.0;
  for (std::size_t i = 0; i < dim(); ++i) m = std::max(m, m_(i, i));
  return m;
}

CholeskyFactor cholesky(const SymMatrix &m) {
  const std::size_t d = m.dim();
  if (d == 0) throw EmptyInput("cholesky of an empty matrix");
  const double threshold = 1e-12 * m.max_diagonal();
  Matrix l(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    double pivot = m(j, j);
    for (std::size_t k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > threshold) || !std::isfinite(pivot)) throw NotPositiveDefinite(j);
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < d; ++i) {
      double acc = m(i, j);
      for (std::size_t k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
      l(i, j) = acc / ljj;
    }
  }
  return CholeskyFactor(std::move(l));
}

Vector CholeskyFactor::solve(std::span<const double> b) const {
  const std::size_t d = dim();
  if (b.size() != d) throw DimensionMismatch("cholesky solve");
  Vector x(b.begin(), b.end());
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < i; ++k) x[i] -= lower_(i, k) * x[k];
    x[i] /= lower_(i, i);
  }
  for (std::size_t ii = d; ii-- > 0;) {
    for (std::size_t k = ii + 1; k < d; ++k) x[ii] -= lower_(k, ii) * x[k];
    x[ii] /= lower_(ii, ii);
  }
  return x;
}

double logdet(const CholeskyFactor &f) {
  double acc = 0.0;
  for (std::size_t i = 0; i < f.dim(); ++i) acc += std::log(f.lower()(i, i));
  return 2.0 * acc;
}

SymMatrix spd_inverse(const CholeskyFactor &f) {
  const std::size_t d = f.dim();
  Matrix inv(d, d);
  Vector e(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    const Vector col = f.solve(e);
    for (std::size_t i = 0; i < d; ++i) inv(i, j) = col[i];
  }
  return SymMatrix(inv);
}

double trace_product(const Matrix &a, const Matrix &b) {
  if (a.rows() != b.cols() || a.cols() != b.rows()) {
    throw DimensionMismatch("trace_product");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * b(j, i);
  return acc;
}

double trace_product(const SymMatrix &a, const Matrix &b) {
  return trace_product(a.matrix(), b);
}

SymMatrix sample_covariance(const Matrix &rows) {
  const std::size_t n = rows.rows();
  const std::size_t d = rows.cols();
  if (n == 0 || d == 0) throw EmptyInput("sample_covariance needs at least one row");
  Matrix acc(d, d);
  for (std::size_t t = 0; t < n; ++t) {
    const auto r = rows.row(t);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j <= i; ++j) acc(i, j) += r[i] * r[j];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  SymMatrix out(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) out.set(i, j, acc(i, j) * inv_n);
  return out;
}

Vector symmetric_eigenvalues(const SymMatrix &m) {
  const std::size_t d = m.dim();
  Matrix a = m.matrix();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < d; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  Vector ev(d);
  for (std::size_t i = 0; i < d; ++i) ev[i] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

double frobenius_norm(const Matrix &m) {
  double acc = 0.0;
  for (double v : m.data()) acc += v * v;
  return std::sqrt(acc);
}

}  // namespace mlptest
