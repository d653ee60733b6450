#include "mlptest/cost.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mlptest/errors.hpp"

namespace mlptest {

Dataset::Dataset(Matrix inputs, Matrix targets)
    : inputs_(std::move(inputs)), targets_(std::move(targets)) {
  if (inputs_.rows() != targets_.rows()) {
    throw DimensionMismatch("inputs and targets have different row counts");
  }
  if (inputs_.rows() == 0) throw EmptyInput("dataset has no rows");
  if (inputs_.cols() == 0 || targets_.cols() == 0) {
    throw DimensionMismatch("dataset needs at least one input and one output column");
  }
  for (double v : inputs_.data())
    if (!std::isfinite(v)) throw InvalidArgument("non-finite input value");
  for (double v : targets_.data())
    if (!std::isfinite(v)) throw InvalidArgument("non-finite target value");
}

void Dataset::check_compatible(const MLPArchitecture &arch) const {
  if (arch.input_dim != input_dim() || arch.output_dim != output_dim()) {
    throw DimensionMismatch("dataset has " + std::to_string(input_dim()) + " inputs and " +
                            std::to_string(output_dim()) + " outputs, architecture expects " +
                            std::to_string(arch.input_dim) + " and " +
                            std::to_string(arch.output_dim));
  }
}

void Dataset::check_fittable() const {
  if (size() < output_dim() + 1) {
    throw InvalidArgument("dataset needs at least d + 1 = " + std::to_string(output_dim() + 1) +
                          " rows");
  }
}

Matrix residuals(const WeightVector &w, const Dataset &data) {
  data.check_compatible(w.arch());
  Matrix r(data.size(), data.output_dim());
  for (std::size_t t = 0; t < data.size(); ++t) {
    const Vector f = forward(w, data.inputs().row(t));
    const auto y = data.targets().row(t);
    for (std::size_t o = 0; o < f.size(); ++o) r(t, o) = y[o] - f[o];
  }
  return r;
}

ResidualCovariance residual_covariance(const Matrix &residual_rows) {
  SymMatrix gamma = sample_covariance(residual_rows);
  try {
    CholeskyFactor factor = cholesky(gamma);
    SymMatrix inverse = spd_inverse(factor);
    return {std::move(gamma), std::move(factor), std::move(inverse)};
  } catch (const NotPositiveDefinite &e) {
    throw SingularCovariance(std::string("residual covariance is singular: ") + e.what());
  }
}

ResidualCovariance gamma_n(const WeightVector &w, const Dataset &data) {
  return residual_covariance(residuals(w, data));
}

double u_n(const WeightVector &w, const Dataset &data) {
  return logdet(gamma_n(w, data).factor);
}

double v_n(const WeightVector &w, const Dataset &data) {
  const Matrix r = residuals(w, data);
  double acc = 0.0;
  for (double v : r.data()) acc += v * v;
  return acc;
}

double gls_cost(const WeightVector &w, const Dataset &data, const SymMatrix &gamma) {
  if (gamma.dim() != data.output_dim()) throw DimensionMismatch("gls weighting matrix");
  CholeskyFactor factor = [&] {
    try {
      return cholesky(gamma);
    } catch (const NotPositiveDefinite &e) {
      throw SingularCovariance(std::string("gls weighting matrix: ") + e.what());
    }
  }();
  const Matrix r = residuals(w, data);
  double acc = 0.0;
  for (std::size_t t = 0; t < r.rows(); ++t) {
    const auto row = r.row(t);
    const Vector x = factor.solve(row);
    for (std::size_t o = 0; o < x.size(); ++o) acc += row[o] * x[o];
  }
  return acc / static_cast<double>(r.rows());
}

namespace {

void check_index(const WeightVector &w, std::size_t k) {
  if (k >= w.size()) throw InvalidArgument("weight index out of range");
}

}  // namespace

Matrix a_n(const WeightVector &w, const Dataset &data, std::size_t k) {
  check_index(w, k);
  const Matrix r = residuals(w, data);
  const std::size_t d = data.output_dim();
  Matrix acc(d, d);
  for (std::size_t t = 0; t < data.size(); ++t) {
    const Matrix jac = weight_jacobian(w, data.inputs().row(t));
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) acc(i, j) -= jac(i, k) * r(t, j);
  }
  return (1.0 / static_cast<double>(data.size())) * acc;
}

Matrix b_n(const WeightVector &w, const Dataset &data, std::size_t k, std::size_t l) {
  check_index(w, k);
  check_index(w, l);
  data.check_compatible(w.arch());
  const std::size_t d = data.output_dim();
  Matrix acc(d, d);
  for (std::size_t t = 0; t < data.size(); ++t) {
    const Matrix jac = weight_jacobian(w, data.inputs().row(t));
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) acc(i, j) += jac(i, k) * jac(j, l);
  }
  return (1.0 / static_cast<double>(data.size())) * acc;
}

Matrix c_n(const WeightVector &w, const Dataset &data, std::size_t k, std::size_t l) {
  check_index(w, k);
  check_index(w, l);
  const Matrix r = residuals(w, data);
  const std::size_t d = data.output_dim();
  Matrix acc(d, d);
  for (std::size_t t = 0; t < data.size(); ++t) {
    const Vector second = weight_second_derivative(w, data.inputs().row(t), k, l);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) acc(i, j) -= r(t, i) * second[j];
  }
  return (1.0 / static_cast<double>(data.size())) * acc;
}

CostEvaluation evaluate_u_n(const WeightVector &w, const Dataset &data, bool with_gradient,
                            bool with_hessian) {
  const Matrix r = residuals(w, data);
  ResidualCovariance cov = residual_covariance(r);
  CostEvaluation out;
  out.value = logdet(cov.factor);
  if (!with_gradient && !with_hessian) {
    out.residual_cov = std::move(cov);
    return out;
  }

  const std::size_t n = data.size();
  const std::size_t d = data.output_dim();
  const std::size_t s = w.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const Matrix &g_inv = cov.inverse.matrix();

  Vector grad(s, 0.0);
  Matrix jtgj(s, s);       // sum_t J^T G J
  Matrix curvature(s, s);  // sum_t (G r_t) . d2F
  std::vector<Matrix> a_blocks;
  if (with_hessian) a_blocks.assign(s, Matrix(d, d));

  for (std::size_t t = 0; t < n; ++t) {
    const auto z = data.inputs().row(t);
    const auto rt = r.row(t);
    const Matrix jac = weight_jacobian(w, z);
    const Vector v = g_inv * rt;
    for (std::size_t k = 0; k < s; ++k) {
      double dot = 0.0;
      for (std::size_t o = 0; o < d; ++o) dot += jac(o, k) * v[o];
      grad[k] -= dot;
    }
    if (!with_hessian) continue;

    const Matrix gj = g_inv * jac;
    for (std::size_t k = 0; k < s; ++k) {
      for (std::size_t l = 0; l <= k; ++l) {
        double acc = 0.0;
        for (std::size_t o = 0; o < d; ++o) acc += jac(o, k) * gj(o, l);
        jtgj(k, l) += acc;
      }
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) a_blocks[k](i, j) -= jac(i, k) * rt[j];
    }
    const Matrix c = contract_second_derivative(w, z, v);
    for (std::size_t k = 0; k < s; ++k)
      for (std::size_t l = 0; l <= k; ++l) curvature(k, l) += c(k, l);
  }
  for (double &gk : grad) gk *= 2.0 * inv_n;
  out.gradient = std::move(grad);

  if (with_hessian) {
    std::vector<Matrix> ga(s);     // G A_k
    std::vector<Matrix> gsym(s);   // G (A_l + A_l^T)
    for (std::size_t k = 0; k < s; ++k) {
      a_blocks[k] = inv_n * a_blocks[k];
      ga[k] = g_inv * a_blocks[k];
      gsym[k] = g_inv * (a_blocks[k] + a_blocks[k].transpose());
    }
    Matrix h(s, s);
    for (std::size_t k = 0; k < s; ++k) {
      for (std::size_t l = 0; l <= k; ++l) {
        const double mixed_kl = trace_product(gsym[l], ga[k]);
        const double mixed_lk = trace_product(gsym[k], ga[l]);
        const double value = -(mixed_kl + mixed_lk) + 2.0 * inv_n * jtgj(k, l) -
                             2.0 * inv_n * curvature(k, l);
        h(k, l) = value;
        h(l, k) = value;
      }
    }
    out.hessian = SymMatrix(h);
  }
  out.residual_cov = std::move(cov);
  return out;
}

Vector grad_u_n(const WeightVector &w, const Dataset &data) {
  return *evaluate_u_n(w, data, true, false).gradient;
}

SymMatrix hessian_u_n(const WeightVector &w, const Dataset &data) {
  return *evaluate_u_n(w, data, false, true).hessian;
}

const char *to_string(CostKind::Kind kind) {
  switch (kind) {
    case CostKind::Kind::kLogDet:
      return "logdet";
    case CostKind::Kind::kSumSquares:
      return "sumsquares";
    case CostKind::Kind::kGls:
      return "gls";
  }
  return "unknown";
}

CostEvaluation evaluate_cost(const CostKind &kind, const WeightVector &w, const Dataset &data,
                             bool with_gradient, bool with_hessian) {
  if (kind.kind == CostKind::Kind::kLogDet) {
    return evaluate_u_n(w, data, with_gradient, with_hessian);
  }

  // Quadratic costs (1/n) sum_t r_t^T M r_t with M = I or gamma^{-1}.
  std::optional<SymMatrix> weight;
  if (kind.kind == CostKind::Kind::kGls) {
    if (!kind.gamma) throw InvalidArgument("gls cost needs a weighting matrix");
    if (kind.gamma->dim() != data.output_dim()) throw DimensionMismatch("gls weighting matrix");
    try {
      weight = spd_inverse(cholesky(*kind.gamma));
    } catch (const NotPositiveDefinite &e) {
      throw SingularCovariance(std::string("gls weighting matrix: ") + e.what());
    }
  }
  const Matrix r = residuals(w, data);
  const std::size_t n = data.size();
  const std::size_t s = w.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  CostEvaluation out;
  with_gradient = with_gradient || with_hessian;
  Vector grad(with_gradient ? s : 0, 0.0);
  Matrix hess(with_hessian ? s : 0, with_hessian ? s : 0);
  double value = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const auto z = data.inputs().row(t);
    const auto rt = r.row(t);
    const Vector v = weight ? weight->matrix() * rt : Vector(rt.begin(), rt.end());
    for (std::size_t o = 0; o < v.size(); ++o) value += rt[o] * v[o];
    if (!with_gradient) continue;
    const Matrix jac = weight_jacobian(w, z);
    for (std::size_t k = 0; k < s; ++k) {
      double dot = 0.0;
      for (std::size_t o = 0; o < v.size(); ++o) dot += jac(o, k) * v[o];
      grad[k] -= 2.0 * dot;
    }
    if (!with_hessian) continue;
    // 2 J^T M J - 2 (M r) . d2F
    const Matrix mj = weight ? weight->matrix() * jac : jac;
    const Matrix c = contract_second_derivative(w, z, v);
    for (std::size_t k = 0; k < s; ++k)
      for (std::size_t l = 0; l <= k; ++l) {
        double acc = 0.0;
        for (std::size_t o = 0; o < v.size(); ++o) acc += jac(o, k) * mj(o, l);
        hess(k, l) += 2.0 * (acc - c(k, l));
      }
  }
  out.value = value * inv_n;
  if (with_gradient) {
    for (double &g : grad) g *= inv_n;
    out.gradient = std::move(grad);
  }
  if (with_hessian) {
    for (std::size_t k = 0; k < s; ++k)
      for (std::size_t l = 0; l < k; ++l) hess(l, k) = hess(k, l);
    out.hessian = SymMatrix(inv_n * hess);
  }
  return out;
}

DerivativeCheck check_derivatives(const WeightVector &w, const Dataset &data, double step,
                                  double floor) {
  const CostEvaluation e = evaluate_u_n(w, data, true, true);
  const Vector &grad = *e.gradient;
  const SymMatrix &hess = *e.hessian;
  const std::size_t s = w.size();
  auto rel = [floor](double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
  };
  DerivativeCheck out;
  for (std::size_t k = 0; k < s; ++k) {
    WeightVector plus = w, minus = w;
    plus.set(k, w[k] + step);
    minus.set(k, w[k] - step);
    const double fd = (u_n(plus, data) - u_n(minus, data)) / (2.0 * step);
    out.max_gradient_error = std::max(out.max_gradient_error, rel(grad[k], fd));
    const Vector gp = grad_u_n(plus, data);
    const Vector gm = grad_u_n(minus, data);
    for (std::size_t l = 0; l < s; ++l) {
      const double fd2 = (gp[l] - gm[l]) / (2.0 * step);
      out.max_hessian_error = std::max(out.max_hessian_error, rel(hess(l, k), fd2));
      out.hessian_asymmetry = std::max(out.hessian_asymmetry, std::abs(hess(k, l) - hess(l, k)));
    }
  }
  return out;
}

}  // namespace mlptest
