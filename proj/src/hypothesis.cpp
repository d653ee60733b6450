#include "mlptest/hypothesis.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <string>

#include "mlptest/errors.hpp"

namespace mlptest {

double chi2_cdf(double x, int dof) {
  if (dof <= 0) throw InvalidArgument("chi-square degrees of freedom must be positive");
  if (std::isnan(x) || x < 0.0) throw InvalidArgument("chi2_cdf needs x >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return boost::math::gamma_p(0.5 * dof, 0.5 * x);
}

double chi2_quantile(double p, int dof) {
  if (!(p >= 0.0 && p < 1.0)) throw InvalidArgument("chi2_quantile needs p in [0, 1)");
  if (p == 0.0) return 0.0;
  double lo = 0.0;
  double hi = static_cast<double>(dof) + 10.0;
  while (chi2_cdf(hi, dof) < p) hi *= 2.0;
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    if (chi2_cdf(mid, dof) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double clamp_nested_statistic(double raw, const char *name) {
  if (raw >= 0.0) return raw;
  if (raw >= -kNestingSlack) return 0.0;
  throw InconsistentStatistic(std::string(name) + " = " + std::to_string(raw) +
                              ": the full fit is worse than the restricted fit");
}

namespace {

struct NestedFits {
  FitResult restricted;
  FitResult full;
  double statistic = 0.0;
};

NestedFits fit_nested(const Dataset &data, const MLPArchitecture &arch,
                      const ParameterMask &restricted, const FitConfig &cfg,
                      const CostKind &cost, const char *name) {
  NestedFits out;
  out.restricted = minimize(data, arch, restricted, cfg, cost);
  FitConfig full_cfg = cfg;
  full_cfg.initial_points.push_back(out.restricted.weights);
  out.full = minimize(data, arch, ParameterMask(arch), full_cfg, cost);
  const double n = static_cast<double>(data.size());
  out.statistic = clamp_nested_statistic(n * (out.restricted.cost - out.full.cost), name);
  return out;
}

void check_restricted(const MLPArchitecture &arch, const ParameterMask &restricted) {
  if (!(restricted.arch() == arch)) throw ArchMismatch("restricted mask architecture");
  if (restricted.pinned_count() == 0) {
    throw InvalidArgument("restricted mask must pin at least one weight (dof >= 1)");
  }
}

}  // namespace

TestReport run_test(const Dataset &data, const MLPArchitecture &arch,
                    const ParameterMask &restricted, const FitConfig &cfg,
                    StatisticKinds kinds) {
  check_restricted(arch, restricted);
  if (!kinds.t && !kinds.s) throw InvalidArgument("no statistic requested");
  TestReport report;
  report.n = data.size();
  report.dof = static_cast<int>(restricted.pinned_count());
  if (kinds.t) {
    NestedFits fits = fit_nested(data, arch, restricted, cfg, CostKind::logdet(), "T_n");
    report.t_n = fits.statistic;
    report.p_value_t = 1.0 - chi2_cdf(report.t_n, report.dof);
    for (std::size_t i = 0; i < kTestLevels.size(); ++i) {
      report.decisions[i] = {kTestLevels[i], report.p_value_t < kTestLevels[i]};
    }
    report.fit_full = std::move(fits.full);
    report.fit_restricted = std::move(fits.restricted);
  }
  if (kinds.s) {
    NestedFits fits = fit_nested(data, arch, restricted, cfg, CostKind::sumsquares(), "S_n");
    report.s_n = fits.statistic;
    report.ls_fit_full = std::move(fits.full);
    report.ls_fit_restricted = std::move(fits.restricted);
  }
  return report;
}

TestReport t_statistic(const Dataset &data, const MLPArchitecture &arch,
                       const ParameterMask &restricted, const FitConfig &cfg) {
  return run_test(data, arch, restricted, cfg, {true, false});
}

double s_statistic(const Dataset &data, const MLPArchitecture &arch,
                   const ParameterMask &restricted, const FitConfig &cfg) {
  check_restricted(arch, restricted);
  return fit_nested(data, arch, restricted, cfg, CostKind::sumsquares(), "S_n").statistic;
}

double quadratic_form_statistic(const Dataset &data, const WeightVector &full,
                                const WeightVector &restricted) {
  const WeightVector aligned = align_to(full, restricted);
  const SymMatrix info = estimate_info_matrix(aligned, data);
  Vector delta(aligned.size());
  for (std::size_t k = 0; k < delta.size(); ++k) delta[k] = aligned[k] - restricted[k];
  const Vector id = info.matrix() * delta;
  double q = 0.0;
  for (std::size_t k = 0; k < delta.size(); ++k) q += delta[k] * id[k];
  return static_cast<double>(data.size()) * q;
}

}  // namespace mlptest
