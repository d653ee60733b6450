#ifndef MLPTEST_COST_HPP_
#define MLPTEST_COST_HPP_

#include <cstddef>
#include <optional>

#include "mlptest/linalg.hpp"
#include "mlptest/mlp.hpp"

namespace mlptest {

// Observations (Z_t, Y_t), one row per t.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Matrix inputs, Matrix targets);

  std::size_t size() const { return inputs_.rows(); }
  std::size_t input_dim() const { return inputs_.cols(); }
  std::size_t output_dim() const { return targets_.cols(); }
  const Matrix &inputs() const { return inputs_; }
  const Matrix &targets() const { return targets_; }

  void check_compatible(const MLPArchitecture &arch) const;

  // With fewer than d + 1 rows Gamma_n(W) is singular at any W that can fit
  // the data, so fitting refuses such datasets.
  void check_fittable() const;

 private:
  Matrix inputs_;
  Matrix targets_;
};

struct ResidualCovariance {
  SymMatrix gamma;
  CholeskyFactor factor;
  SymMatrix inverse;
};

struct CostEvaluation {
  double value = 0.0;
  std::optional<Vector> gradient;
  std::optional<SymMatrix> hessian;
  std::optional<ResidualCovariance> residual_cov;
};

// n x d matrix of Y_t - F_W(Z_t).
Matrix residuals(const WeightVector &w, const Dataset &data);

// Throws SingularCovariance when the residual second-moment matrix is not
// positive definite.
ResidualCovariance residual_covariance(const Matrix &residual_rows);
ResidualCovariance gamma_n(const WeightVector &w, const Dataset &data);

// ln det Gamma_n(W).
double u_n(const WeightVector &w, const Dataset &data);

// Raw sum of squared residual norms (no 1/n).
double v_n(const WeightVector &w, const Dataset &data);

// (1/n) sum_t r_t^T gamma^{-1} r_t.
double gls_cost(const WeightVector &w, const Dataset &data, const SymMatrix &gamma);

// Building blocks of the derivatives of U_n. These are straightforward
// per-sample loops; grad_u_n and hessian_u_n use a fused single pass.
Matrix a_n(const WeightVector &w, const Dataset &data, std::size_t k);
Matrix b_n(const WeightVector &w, const Dataset &data, std::size_t k, std::size_t l);
Matrix c_n(const WeightVector &w, const Dataset &data, std::size_t k, std::size_t l);

// Component k: 2 tr(Gamma_n^{-1} A_n(W_k)).
Vector grad_u_n(const WeightVector &w, const Dataset &data);

// Entry (k, l):
//   -2 tr(G (A_l + A_l^T) G A_k) + 2 tr(G B_kl) + 2 tr(G C_kl),  G = Gamma_n^{-1}.
SymMatrix hessian_u_n(const WeightVector &w, const Dataset &data);

CostEvaluation evaluate_u_n(const WeightVector &w, const Dataset &data, bool with_gradient,
                            bool with_hessian);

struct CostKind {
  enum class Kind { kLogDet, kSumSquares, kGls };
  Kind kind = Kind::kLogDet;
  std::optional<SymMatrix> gamma;  // only for kGls

  static CostKind logdet() { return {Kind::kLogDet, std::nullopt}; }
  static CostKind sumsquares() { return {Kind::kSumSquares, std::nullopt}; }
  static CostKind gls(SymMatrix g) { return {Kind::kGls, std::move(g)}; }
};

const char *to_string(CostKind::Kind kind);

// Objective used by the optimizer: U_n for kLogDet, V_n / n for kSumSquares,
// gls_cost for kGls.
CostEvaluation evaluate_cost(const CostKind &kind, const WeightVector &w,
                             const Dataset &data, bool with_gradient,
                             bool with_hessian = false);

struct DerivativeCheck {
  double max_gradient_error = 0.0;  // relative, see check_derivatives
  double max_hessian_error = 0.0;
  double hessian_asymmetry = 0.0;   // max |H_kl - H_lk|
};

// Compares grad_u_n with central differences of u_n and hessian_u_n with
// central differences of grad_u_n. Errors are |a - b| / max(|a|, |b|, floor).
DerivativeCheck check_derivatives(const WeightVector &w, const Dataset &data,
                                  double step = 1e-5, double floor = 1e-4);

}  // namespace mlptest

#endif  // MLPTEST_COST_HPP_
