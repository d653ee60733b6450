#ifndef MLPTEST_ERRORS_HPP_
#define MLPTEST_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mlptest {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public Error {
 public:
  explicit NotPositiveDefinite(std::size_t pivot_index)
      : Error("matrix is not positive definite (pivot " +
              std::to_string(pivot_index) + ")"),
        pivot_index_(pivot_index) {}

  std::size_t pivot_index() const { return pivot_index_; }

 private:
  std::size_t pivot_index_;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class ArchMismatch : public Error {
 public:
  using Error::Error;
};

// Residuals do not span the output space, so Gamma_n(W) has no inverse and
// the log-determinant cost is undefined at W.
class SingularCovariance : public Error {
 public:
  using Error::Error;
};

class AllStartsFailed : public Error {
 public:
  using Error::Error;
};

// The full-model optimum is worse than the restricted one by more than the
// optimizer slack.
class InconsistentStatistic : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ConfigInvalid : public Error {
 public:
  using Error::Error;
};

}  // namespace mlptest

#endif  // MLPTEST_ERRORS_HPP_
