#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mlptest/errors.hpp"
#include "mlptest/hypothesis.hpp"
#include "mlptest/simulate.hpp"

namespace mlptest {
namespace {

// erf by its Maclaurin series, summed until terms fall below 1e-18.
double erf_series(double x) {
  double term = x, sum = x;
  for (int k = 1; k < 200; ++k) {
    term *= -x * x / k;
    const double add = term / (2 * k + 1);
    sum += add;
    if (std::abs(add) < 1e-18) break;
  }
  return 2.0 / std::sqrt(std::numbers::pi) * sum;
}

TEST(Chi2Cdf, ClosedForms) {
  for (int k : {1, 2, 3, 7}) EXPECT_EQ(chi2_cdf(0.0, k), 0.0);
  EXPECT_NEAR(chi2_cdf(2.0 * std::log(2.0), 2), 0.5, 1e-14);
  for (double x : {0.3, 1.0, 5.0, 20.0}) EXPECT_NEAR(chi2_cdf(x, 2), 1.0 - std::exp(-x / 2), 1e-14);
  for (double x : {0.5, 1.0, 4.0}) EXPECT_NEAR(chi2_cdf(x, 1), erf_series(std::sqrt(x / 2)), 1e-10);
  // dof 4: 1 - exp(-x/2)(1 + x/2).
  EXPECT_NEAR(chi2_cdf(3.0, 4), 1.0 - std::exp(-1.5) * 2.5, 1e-14);
  EXPECT_THROW(chi2_cdf(-1.0, 2), InvalidArgument);
  EXPECT_THROW(chi2_cdf(1.0, 0), InvalidArgument);
}

TEST(Chi2Quantile, InvertsCdf) {
  EXPECT_NEAR(chi2_quantile(0.5, 2), 2.0 * std::log(2.0), 1e-8);
  EXPECT_NEAR(chi2_quantile(0.95, 1), 3.841458820694124, 1e-7);
  EXPECT_NEAR(chi2_quantile(0.99, 2), 9.210340371976184, 1e-7);
  for (double p : {0.01, 0.3, 0.9}) EXPECT_NEAR(chi2_cdf(chi2_quantile(p, 5), 5), p, 1e-8);
}

TEST(Clamp, NestingSlack) {
  EXPECT_EQ(clamp_nested_statistic(-5e-10, "t_n"), 0.0);
  EXPECT_EQ(clamp_nested_statistic(0.0, "t_n"), 0.0);
  EXPECT_EQ(clamp_nested_statistic(3.5, "t_n"), 3.5);
  EXPECT_THROW(clamp_nested_statistic(-1e-6, "t_n"), InconsistentStatistic);
}

TEST(PValue, NonIncreasingInStatistic) {
  double prev = 1.0;
  for (double t = 0.0; t < 30.0; t += 0.25) {
    const double p = 1.0 - chi2_cdf(t, 3);
    EXPECT_LE(p, prev);
    prev = p;
  }
}

class SmallDesign : public ::testing::Test {
 protected:
  // h = 1, d' = 1, d = 2; the restriction pins the first output bias.
  GeneratorSpec spec(double pinned_truth, std::size_t n, std::uint64_t seed) const {
    GeneratorSpec g;
    g.arch = arch;
    g.true_weights = WeightVector(arch, Vector{0.8, 0.3, 2.0, -1.5, pinned_truth, -0.2});
    g.noise_cov = SymMatrix{{1.0, 0.0}, {0.0, 4.0}};
    g.n = n;
    g.seed = seed;
    return g;
  }
  ParameterMask restricted() const {
    const std::size_t pinned[] = {arch.output_bias(0)};
    return ParameterMask::pinned(arch, pinned);
  }
  FitConfig config(std::uint64_t seed, const WeightVector &truth) const {
    FitConfig cfg;
    cfg.n_starts = 2;
    cfg.seed = seed;
    cfg.initial_points = {truth};
    return cfg;
  }
  const MLPArchitecture arch{1, 1, 2};
};

TEST_F(SmallDesign, ReportFieldsAreConsistent) {
  const GeneratorSpec g = spec(0.0, 500, 1);
  const TestReport rep = run_test(generate(g), arch, restricted(), config(1, g.true_weights),
                                  StatisticKinds{true, true});
  EXPECT_EQ(rep.dof, 1);
  EXPECT_EQ(rep.n, 500u);
  EXPECT_GE(rep.t_n, 0.0);
  EXPECT_NEAR(rep.p_value_t, 1.0 - chi2_cdf(rep.t_n, 1), 1e-15);
  EXPECT_NEAR(rep.t_n, 500.0 * (rep.fit_restricted.cost - rep.fit_full.cost), 1e-9);
  ASSERT_TRUE(rep.s_n.has_value());
  EXPECT_GE(*rep.s_n, 0.0);
  for (std::size_t i = 0; i < kTestLevels.size(); ++i) {
    EXPECT_EQ(rep.decisions[i].level, kTestLevels[i]);
    EXPECT_EQ(rep.decisions[i].reject, rep.p_value_t < kTestLevels[i]);
  }
  EXPECT_EQ(rep.fit_restricted.weights[arch.output_bias(0)], 0.0);
}

TEST_F(SmallDesign, WrappersAgreeWithRunTest) {
  const GeneratorSpec g = spec(0.0, 300, 2);
  const Dataset data = generate(g);
  const FitConfig cfg = config(2, g.true_weights);
  const TestReport rep = run_test(data, arch, restricted(), cfg, StatisticKinds{true, true});
  EXPECT_EQ(t_statistic(data, arch, restricted(), cfg).t_n, rep.t_n);
  EXPECT_EQ(s_statistic(data, arch, restricted(), cfg), *rep.s_n);
}

TEST_F(SmallDesign, RejectsMaskWithoutPinnedCoordinates) {
  const GeneratorSpec g = spec(0.0, 100, 3);
  EXPECT_THROW(run_test(generate(g), arch, ParameterMask(arch), config(3, g.true_weights)),
               InvalidArgument);
}

TEST_F(SmallDesign, RowOrderInvariance) {
  const GeneratorSpec g = spec(0.0, 300, 4);
  const Dataset data = generate(g);
  Matrix z(300, 1), y(300, 2);
  for (std::size_t t = 0; t < 300; ++t) {
    z(t, 0) = data.inputs()(299 - t, 0);
    y(t, 0) = data.targets()(299 - t, 0);
    y(t, 1) = data.targets()(299 - t, 1);
  }
  const FitConfig cfg = config(4, g.true_weights);
  const double t1 = run_test(data, arch, restricted(), cfg).t_n;
  const double t2 = run_test(Dataset(z, y), arch, restricted(), cfg).t_n;
  EXPECT_NEAR(t1, t2, 1e-6 * std::max(1.0, t1));
}

TEST_F(SmallDesign, NullMeanIsNearDof) {
  const int reps = 150;
  double sum = 0.0;
  for (int r = 0; r < reps; ++r) {
    const GeneratorSpec g = spec(0.0, 500, 1000 + r);
    sum += run_test(generate(g), arch, restricted(), config(r, g.true_weights)).t_n;
  }
  // Standard error of the mean of chi2_1 over 150 draws is about 0.115.
  EXPECT_NEAR(sum / reps, 1.0, 0.4);
}

TEST_F(SmallDesign, PowerAgainstViolatedWeight) {
  const int reps = 200;
  int rejected = 0;
  for (int r = 0; r < reps; ++r) {
    GeneratorSpec g = spec(0.5, 1000, 5000 + r);
    g.noise_cov = SymMatrix{{0.5, 0.0}, {0.0, 2.0}};
    const TestReport rep =
        run_test(generate(g), arch, restricted(), config(r, g.true_weights));
    if (rep.p_value_t < 0.01) ++rejected;
  }
  EXPECT_GE(rejected, 190);
}

TEST_F(SmallDesign, QuadraticFormTracksStatistic) {
  const GeneratorSpec g = spec(0.0, 2000, 6);
  const Dataset data = generate(g);
  const TestReport rep = run_test(data, arch, restricted(), config(6, g.true_weights));
  const double q = quadratic_form_statistic(data, rep.fit_full.weights,
                                            rep.fit_restricted.weights);
  EXPECT_GE(q, 0.0);
  EXPECT_NEAR(q, rep.t_n, 0.2 * std::max(1.0, rep.t_n));
}

}  // namespace
}  // namespace mlptest
