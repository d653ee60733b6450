#ifndef MLPTEST_HYPOTHESIS_HPP_
#define MLPTEST_HYPOTHESIS_HPP_

#include <array>
#include <cstddef>
#include <optional>

#include "mlptest/cost.hpp"
#include "mlptest/estimate.hpp"
#include "mlptest/mlp.hpp"

namespace mlptest {

inline constexpr std::array<double, 3> kTestLevels = {0.10, 0.05, 0.01};

// Statistics in [-kNestingSlack, 0) are optimizer noise and are clamped to 0.
inline constexpr double kNestingSlack = 1e-9;

// P(dof/2, x/2), the regularized lower incomplete gamma function.
double chi2_cdf(double x, int dof);

// Inverse of chi2_cdf by bisection, absolute error below 1e-8.
double chi2_quantile(double p, int dof);

struct LevelDecision {
  double level = 0.0;
  bool reject = false;
};

struct TestReport {
  std::size_t n = 0;
  int dof = 0;
  double t_n = 0.0;
  double p_value_t = 1.0;
  std::array<LevelDecision, kTestLevels.size()> decisions{};
  FitResult fit_full;
  FitResult fit_restricted;

  std::optional<double> s_n;
  std::optional<FitResult> ls_fit_full;
  std::optional<FitResult> ls_fit_restricted;
};

struct StatisticKinds {
  bool t = true;
  bool s = false;
};

// Clamps values in [-kNestingSlack, 0) to zero; more negative values throw
// InconsistentStatistic.
double clamp_nested_statistic(double raw, const char *name);

// Fits the restricted model, then the full model with the restricted
// optimum added as a starting point, and forms n (min_q - min_s) for each
// requested cost.
TestReport run_test(const Dataset &data, const MLPArchitecture &arch,
                    const ParameterMask &restricted, const FitConfig &cfg,
                    StatisticKinds kinds = {});

TestReport t_statistic(const Dataset &data, const MLPArchitecture &arch,
                       const ParameterMask &restricted, const FitConfig &cfg);

// n (min_q Vbar_n - min_s Vbar_n) with Vbar_n = V_n / n.
double s_statistic(const Dataset &data, const MLPArchitecture &arch,
                   const ParameterMask &restricted, const FitConfig &cfg);

// n (w_full - w_restricted)^T I (w_full - w_restricted), with I estimated at
// the full fit and the full fit aligned to the restricted one within the
// symmetry group.
double quadratic_form_statistic(const Dataset &data, const WeightVector &full,
                                const WeightVector &restricted);

}  // namespace mlptest

#endif  // MLPTEST_HYPOTHESIS_HPP_
