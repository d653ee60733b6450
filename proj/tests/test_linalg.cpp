#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mlptest/errors.hpp"
#include "mlptest/linalg.hpp"

namespace mlptest {
namespace {

// Determinant by Laplace expansion along the first row.
double cofactor_det(const Matrix &m) {
  const std::size_t d = m.rows();
  if (d == 1) return m(0, 0);
  double det = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    Matrix minor(d - 1, d - 1);
    for (std::size_t i = 1; i < d; ++i) {
      std::size_t cc = 0;
      for (std::size_t j = 0; j < d; ++j) {
        if (j == c) continue;
        minor(i - 1, cc++) = m(i, j);
      }
    }
    det += (c % 2 == 0 ? 1.0 : -1.0) * m(0, c) * cofactor_det(minor);
  }
  return det;
}

SymMatrix random_spd(std::size_t d, std::mt19937_64 &rng) {
  std::normal_distribution<double> normal;
  Matrix a(d, d);
  for (auto &v : a.data()) v = normal(rng);
  Matrix m = a * a.transpose();
  for (std::size_t i = 0; i < d; ++i) m(i, i) += 0.5;
  return SymMatrix(m);
}

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64 &rng) {
  std::normal_distribution<double> normal;
  Matrix a(r, c);
  for (auto &v : a.data()) v = normal(rng);
  return a;
}

TEST(SymMatrix, ConstructionSymmetrizes) {
  const SymMatrix s(Matrix{{1.0, 2.0}, {4.0, 5.0}});
  EXPECT_EQ(s(0, 1), 3.0);
  EXPECT_EQ(s(1, 0), 3.0);
  EXPECT_THROW(SymMatrix(Matrix(2, 3)), DimensionMismatch);
}

TEST(Cholesky, Identity) {
  const auto f = cholesky(SymMatrix::identity(2));
  EXPECT_EQ(f.lower(), Matrix::identity(2));
}

TEST(Cholesky, TwoByTwo) {
  const auto f = cholesky(SymMatrix{{4.0, 2.0}, {2.0, 3.0}});
  EXPECT_DOUBLE_EQ(f.lower()(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(f.lower()(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(f.lower()(1, 1), std::sqrt(2.0));
  EXPECT_EQ(f.lower()(0, 1), 0.0);
}

TEST(Cholesky, RankOneFailsAtSecondPivot) {
  try {
    cholesky(SymMatrix{{1.0, 1.0}, {1.0, 1.0}});
    FAIL() << "expected NotPositiveDefinite";
  } catch (const NotPositiveDefinite &e) {
    EXPECT_EQ(e.pivot_index(), 1u);
  }
}

TEST(Cholesky, ThresholdIsScaleInvariant) {
  // Pivot 1e-13 relative to the largest diagonal is treated as singular.
  const double big = 1e6;
  EXPECT_THROW(cholesky(SymMatrix{{big, 0.0}, {0.0, big * 1e-13}}), NotPositiveDefinite);
  EXPECT_NO_THROW(cholesky(SymMatrix{{big, 0.0}, {0.0, big * 1e-11}}));
}

TEST(Cholesky, ReconstructsRandomSpd) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const SymMatrix a = random_spd(1 + rep % 6, rng);
    const auto f = cholesky(a);
    const Matrix back = f.lower() * f.lower().transpose();
    for (std::size_t i = 0; i < a.dim(); ++i) {
      EXPECT_GT(f.lower()(i, i), 0.0);
      for (std::size_t j = 0; j < a.dim(); ++j)
        EXPECT_NEAR(back(i, j), a(i, j), 1e-10 * a.max_diagonal());
    }
  }
}

TEST(Logdet, KnownValues) {
  EXPECT_EQ(logdet(cholesky(SymMatrix::identity(4))), 0.0);
  const double diag[] = {2.0, 8.0};
  EXPECT_NEAR(logdet(cholesky(SymMatrix::diagonal(diag))), std::log(16.0), 1e-15);
}

TEST(Logdet, MatchesCofactorExpansion) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t d = 1 + rep % 4;
    const SymMatrix a = random_spd(d, rng);
    const double expected = std::log(cofactor_det(a.matrix()));
    EXPECT_NEAR(logdet(cholesky(a)), expected, 1e-10 * std::max(1.0, std::abs(expected)));
  }
}

TEST(SpdInverse, KnownValues) {
  EXPECT_EQ(spd_inverse(cholesky(SymMatrix::identity(3))), SymMatrix::identity(3));
  const double diag[] = {2.0, 4.0};
  const SymMatrix inv = spd_inverse(cholesky(SymMatrix::diagonal(diag)));
  EXPECT_DOUBLE_EQ(inv(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(inv(1, 1), 0.25);
  EXPECT_EQ(inv(0, 1), 0.0);
}

TEST(SpdInverse, MultipliesBackToIdentity) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const SymMatrix a = random_spd(4, rng);
    const Matrix prod = a.matrix() * spd_inverse(cholesky(a)).matrix();
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(prod(i, j), i == j ? 1.0 : 0.0, 1e-8);
  }
}

TEST(TraceProduct, KnownValues) {
  const Matrix a{{1.0, 2.0}, {3.0, 4.0}};
  const Matrix b{{5.0, 6.0}, {7.0, 8.0}};
  EXPECT_DOUBLE_EQ(trace_product(a, b), 69.0);
  EXPECT_DOUBLE_EQ(trace_product(Matrix::identity(2), b), 13.0);
  EXPECT_THROW(trace_product(a, Matrix(3, 3)), DimensionMismatch);
}

TEST(TraceProduct, CyclicInvariance) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t d = 1 + rep % 5;
    const Matrix a = random_matrix(d, d, rng);
    const Matrix b = random_matrix(d, d, rng);
    EXPECT_NEAR(trace_product(a, b), trace_product(b, a), 1e-12);
    // Also against the explicit product.
    const Matrix ab = a * b;
    double tr = 0.0;
    for (std::size_t i = 0; i < d; ++i) tr += ab(i, i);
    EXPECT_NEAR(trace_product(a, b), tr, 1e-12);
  }
}

TEST(SampleCovariance, KnownValues) {
  const SymMatrix one = sample_covariance(Matrix{{1.0, 0.0}});
  EXPECT_EQ(one, (SymMatrix{{1.0, 0.0}, {0.0, 0.0}}));
  const SymMatrix two = sample_covariance(Matrix{{1.0, 1.0}, {-1.0, -1.0}});
  EXPECT_EQ(two, (SymMatrix{{1.0, 1.0}, {1.0, 1.0}}));
  EXPECT_THROW(sample_covariance(Matrix(0, 2)), EmptyInput);
}

TEST(SampleCovariance, MatchesNaiveLoop) {
  std::mt19937_64 rng(21);
  const Matrix rows = random_matrix(100, 3, rng);
  const SymMatrix cov = sample_covariance(rows);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < 100; ++t) acc += rows(t, i) * rows(t, j);
      EXPECT_NEAR(cov(i, j), acc / 100.0, 1e-12);
    }
}

TEST(SymmetricEigenvalues, DiagonalAndTrace) {
  const double diag[] = {3.0, -1.0, 2.0};
  const Vector ev = symmetric_eigenvalues(SymMatrix::diagonal(diag));
  EXPECT_DOUBLE_EQ(ev[0], -1.0);
  EXPECT_DOUBLE_EQ(ev[2], 3.0);

  std::mt19937_64 rng(4);
  const SymMatrix a = random_spd(5, rng);
  const Vector e = symmetric_eigenvalues(a);
  double tr = 0.0, sum = 0.0, logsum = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    tr += a(i, i);
    sum += e[i];
    logsum += std::log(e[i]);
  }
  EXPECT_NEAR(sum, tr, 1e-10);
  EXPECT_NEAR(logsum, logdet(cholesky(a)), 1e-10);
}

}  // namespace
}  // namespace mlptest
